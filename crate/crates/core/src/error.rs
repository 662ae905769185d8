use thiserror::Error;

/// Errors surfaced by the design, solver and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// The relay KKT system is singular at a zero multiplier.
    #[error("singular relay system at lambda = 0")]
    SingularAtZero,
    #[error("no unflagged trials to aggregate ({flagged} flagged)")]
    EmptyAggregate { flagged: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
