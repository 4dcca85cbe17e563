//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument values (bad shapes, empty datasets, out-of-range
    /// configuration, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Mismatched tensor dimensions in a forward/backward pass.
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    /// An operation was called in the wrong order (e.g. backward before a
    /// train-mode forward, prediction from an untrained model).
    #[error("invalid state: {0}")]
    State(String),

    /// Training produced a non-finite loss or parameter.
    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    /// A matrix factorization failed (covariance not positive-definite even
    /// after jitter).
    #[error("linear algebra failure: {0}")]
    LinAlg(String),

    /// Rejection sampling failed to steer a surface pair into the requested
    /// rank-correlation bin within the attempt budget.
    #[error("no surface pair landed in correlation bin {bin} after {attempts} attempts")]
    BinUnreachable { bin: usize, attempts: usize },

    /// File/serialization problems.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }
}
