use thiserror::Error;

use crate::logic::LogicError;
use crate::miqp::MiqpError;

/// Errors surfaced by model building, I/O and the controllers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Miqp(#[from] MiqpError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
