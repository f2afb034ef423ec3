use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhsError {
    /// Shapes of matrices or vectors do not agree with the declared dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A component was well-formed but failed a structural property check.
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("state outside the Hamiltonian domain: {0}")]
    Domain(String),

    #[error("Newton iteration failed at step {step} (residual {residual:.3e} after {iterations} iterations)")]
    Newton {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    /// Algebraic constraints cannot be met by any state near the guess.
    #[error("inconsistent initial data: algebraic row {row} violated by {violation:.3e}")]
    Inconsistent { row: usize, violation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PhsError>;

pub(crate) fn dim_err(msg: impl Into<String>) -> PhsError {
    PhsError::Dimension(msg.into())
}
