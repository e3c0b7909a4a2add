//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("rate {0} outside [0, 1]")]
    InvalidRate(f64),

    #[error("operation requires a nonempty measure")]
    EmptyMeasure,

    #[error("covariance matrix is singular or not positive-definite")]
    SingularCovariance,

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("solver did not converge after {sweeps} sweeps (residual {residual:e})")]
    SolverNoConvergence { sweeps: usize, residual: f64 },

    #[error("solution failed validation: {0}")]
    ValidationFailed(String),

    #[error("non-finite gradient encountered at step {step}")]
    NonFiniteGradient { step: u64 },

    #[error("non-finite loss encountered at step {step}; snapshot: {snapshot}")]
    NonFiniteLoss { step: u64, snapshot: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
