use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Why a single optimizer restart was abandoned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartFailure {
    pub restart: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} is not positive)")]
    NotPositiveDefinite { pivot: usize },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },

    /// The empirical residual covariance failed to factor, even after jitter.
    #[error("residual covariance is singular (exact interpolation or n <= d)")]
    SingularCovariance,

    #[error("line search found no acceptable step after {halvings} halvings")]
    LineSearchBreakdown { halvings: usize },

    #[error("all {} optimizer restarts failed", .0.len())]
    AllRestartsFailed(Vec<RestartFailure>),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn dim(what: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            what,
            expected,
            found,
        }
    }
}
