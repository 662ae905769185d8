//! CSV writers. Reals use `{:.16e}` (17 significant digits), integers are
//! plain, and every file starts with its header row.

use std::fs;
use std::path::{Path, PathBuf};

use afrelay::montecarlo::{AggregateResult, Algorithm, TrialResult};

use crate::error::CliError;

pub const RESULTS_HEADER: [&str; 9] = [
    "algorithm",
    "snr1_db",
    "snr2_db",
    "mean_mse_analytic",
    "mean_mse_empirical",
    "mean_ser",
    "mean_iters",
    "trials_ok",
    "trials_flagged",
];

pub const TRACE_HEADER: [&str; 2] = ["iteration", "mse"];

pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|source| CliError::Csv { path: path.to_path_buf(), source })
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut w = writer(path)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn write_results(dir: &Path, aggregates: &[AggregateResult]) -> Result<PathBuf, CliError> {
    let path = dir.join("results.csv");
    let rows = aggregates.iter().map(|a| {
        vec![
            a.algorithm.to_string(),
            real(a.snr1_db),
            real(a.snr2_db),
            real(a.mean_mse_analytic),
            real(a.mean_mse_empirical),
            real(a.mean_ser),
            real(a.mean_iters),
            a.trials_ok.to_string(),
            a.trials_flagged.to_string(),
        ]
    });
    write_rows(&path, &RESULTS_HEADER, rows)?;
    Ok(path)
}

/// Mean trace over the unflagged trials; a trace that stopped early keeps
/// its final value for the remaining iterations.
pub fn mean_trace(trials: &[&TrialResult]) -> Vec<f64> {
    let ok: Vec<&&TrialResult> = trials.iter().filter(|t| t.flagged.is_none() && !t.trace.is_empty()).collect();
    let len = ok.iter().map(|t| t.trace.len()).max().unwrap_or(0);
    (0..len)
        .map(|i| ok.iter().map(|t| t.trace[i.min(t.trace.len() - 1)]).sum::<f64>() / ok.len() as f64)
        .collect()
}

pub fn trace_path(dir: &Path, alg: Algorithm, seed: u64) -> PathBuf {
    dir.join(format!("trace_{alg}_{seed}.csv"))
}

pub fn write_trace(path: &Path, trace: &[f64]) -> Result<(), CliError> {
    let rows = trace.iter().enumerate().map(|(i, m)| vec![i.to_string(), real(*m)]);
    write_rows(path, &TRACE_HEADER, rows)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}
