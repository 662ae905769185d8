//! `afrelay`: Monte Carlo sweeps of relay transceiver designs.

mod commands;
mod config;
mod error;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Experiment, RunOptions};
use error::CliError;

#[derive(Parser)]
#[command(name = "afrelay", version, about = "MMSE transceiver design for dual-hop MIMO relay networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the downlink designers over the configured SNR points.
    DownlinkSweep(RunArgs),
    /// Sweep the uplink designers over the configured SNR points.
    UplinkSweep(RunArgs),
    /// Per-iteration MSE of the iterative designers at one SNR point.
    Convergence(RunArgs),
    /// The main designer against every baseline.
    CompareBaselines(RunArgs),
    /// Run the built-in example checks.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Overrides one config key, e.g. `--set trials=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl From<RunArgs> for RunOptions {
    fn from(a: RunArgs) -> Self {
        RunOptions { config: a.config, out: a.out, seed: a.seed, jobs: a.jobs, set: a.set }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (exp, args) = match cli.command {
        Command::Selftest => {
            let (report, failed) = selftest::run();
            print!("{report}");
            return if failed.is_empty() { Ok(()) } else { Err(CliError::SelfTest(failed.join(", "))) };
        }
        Command::DownlinkSweep(a) => (Experiment::DownlinkSweep, a),
        Command::UplinkSweep(a) => (Experiment::UplinkSweep, a),
        Command::Convergence(a) => (Experiment::Convergence, a),
        Command::CompareBaselines(a) => (Experiment::CompareBaselines, a),
    };
    let opts = RunOptions::from(args);
    let (_, out) = commands::run(exp, &opts)?;
    print!("{}", commands::summary(&out));
    println!("wrote {}", opts.out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
