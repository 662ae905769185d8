use std::fs;
use std::path::{Path, PathBuf};

use afrelay::channel::Direction;
use afrelay::montecarlo::{run_experiment, Algorithm, ExperimentConfig, ExperimentOutput};

use crate::config::{parse_settings, render, Defaults};
use crate::error::CliError;
use crate::output::{mean_trace, trace_path, write_results, write_text, write_trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    DownlinkSweep,
    UplinkSweep,
    Convergence,
    CompareBaselines,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub jobs: usize,
    pub set: Vec<String>,
}

const NOTES: &str = "\
# per_hop_equalization: the relay applies the first-hop LMMSE equalizer, scaled to use all of p_r
# uplink: p_s is split evenly, each user transmits at most p_s / users
# trace files: mean over unflagged trials at the first sweep point
";

pub fn load_config(exp: Experiment, opts: &RunOptions) -> Result<ExperimentConfig, CliError> {
    let text = match &opts.config {
        Some(p) => fs::read_to_string(p).map_err(|source| CliError::Io { path: p.clone(), source })?,
        None => String::new(),
    };
    let mut settings = parse_settings(&text)?;
    for spec in &opts.set {
        settings.set(spec)?;
    }
    if let Some(seed) = opts.seed {
        settings.set(&format!("seed={seed}"))?;
    }
    let (direction, defaults) = match exp {
        Experiment::DownlinkSweep => (Some(Direction::Downlink), Defaults::Sweep),
        Experiment::UplinkSweep => (Some(Direction::Uplink), Defaults::Sweep),
        Experiment::Convergence => (None, Defaults::Convergence),
        Experiment::CompareBaselines => (None, Defaults::Baselines),
    };
    settings.resolve(direction, defaults)
}

fn is_iterative(alg: Algorithm) -> bool {
    !matches!(alg, Algorithm::Baseline(_))
}

/// Runs the experiment and writes `results.csv`, one trace file per
/// iterative designer and the resolved `config.txt` into `opts.out`.
pub fn run(exp: Experiment, opts: &RunOptions) -> Result<(ExperimentConfig, ExperimentOutput), CliError> {
    let cfg = load_config(exp, opts)?;
    fs::create_dir_all(&opts.out).map_err(|source| CliError::Io { path: opts.out.clone(), source })?;
    let out = run_experiment(&cfg, opts.jobs)?;
    write_outputs(&opts.out, &cfg, &out)?;
    Ok((cfg, out))
}

pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<(), CliError> {
    write_results(dir, &out.aggregates)?;
    for &alg in cfg.algorithms.iter().filter(|a| is_iterative(**a)) {
        let trials: Vec<_> = out.trials.iter().filter(|t| t.point == 0 && t.algorithm == alg).collect();
        write_trace(&trace_path(dir, alg, cfg.seed), &mean_trace(&trials))?;
    }
    write_text(&dir.join("config.txt"), &format!("{NOTES}\n{}", render(cfg)))
}

pub fn summary(out: &ExperimentOutput) -> String {
    let mut s = format!("{:<22} {:>8} {:>8} {:>12} {:>12} {:>10} {:>8} {:>6}\n", "algorithm", "snr1", "snr2", "mse", "mse_emp", "ser", "iters", "ok");
    for a in &out.aggregates {
        s += &format!(
            "{:<22} {:>8.1} {:>8.1} {:>12.6} {:>12.6} {:>10.2e} {:>8.2} {:>6}{}\n",
            a.algorithm.as_str(),
            a.snr1_db,
            a.snr2_db,
            a.mean_mse_analytic,
            a.mean_mse_empirical,
            a.mean_ser,
            a.mean_iters,
            a.trials_ok,
            if a.trials_flagged > 0 { format!(" ({} flagged)", a.trials_flagged) } else { String::new() }
        );
    }
    s
}
