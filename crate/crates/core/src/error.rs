//! Error type shared across the crate.

use thiserror::Error;

/// Convenience alias used by every fallible operation in the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A theory-model precondition (such as the vertical-only condition) is violated.
    #[error("domain condition violated: {0}")]
    Domain(String),

    #[error("singular quantity: {0}")]
    Singular(String),

    /// Two cells that should differ in price do not move the share being divided by.
    #[error("degenerate treatment: {0}")]
    DegenerateTreatment(String),

    #[error("invalid cell pairing: {0}")]
    InvalidPairing(String),

    #[error("contraction did not converge after {iterations} iterations (sup-norm residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("collinear design columns: {}", .0.join(", "))]
    Collinear(Vec<String>),

    #[error("estimation failed on every start: {}", .0.join("; "))]
    EstimationFailed(Vec<String>),

    #[error("price optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("unsupported data: {0}")]
    UnsupportedData(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of an iterative numerical method rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::EstimationFailed(_) | Error::OptimizationFailed(_)
        )
    }
}
