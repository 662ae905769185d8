use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("--set {spec}: {msg}")]
    Override { spec: String, msg: String },
    #[error(transparent)]
    Core(#[from] afrelay::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("self-test failed: {0}")]
    SelfTest(String),
}
