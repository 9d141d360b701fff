use thiserror::Error;

use crate::trace::TraceRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The dense path was requested for a dimension above the configured cap.
    #[error("dimension {dim} exceeds the dense cap {cap}; use the matrix-free path")]
    Capability { dim: usize, cap: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(
        "warm start did not reach the entry condition after {iterations} iterations \
         (gradient norm {grad_norm:.3e}, required < {bound:.3e})"
    )]
    Init {
        iterations: usize,
        grad_norm: f64,
        bound: f64,
    },

    #[error("oracle failed: {0}")]
    Oracle(String),

    #[error("solver failed: {message}")]
    Solver {
        message: String,
        trace: Box<Vec<TraceRecord>>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
