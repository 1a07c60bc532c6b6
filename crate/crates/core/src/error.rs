use thiserror::Error;

/// Errors raised by the synthesis, certification and simulation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The Sylvester/Lyapunov operator is singular (two eigenvalues sum to zero).
    #[error("singular equation: {0}")]
    SingularEquation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// One of the standing assumptions (strong connectivity, joint
    /// observability) failed numerically.
    #[error("standing assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("simulation diverged at step {step} (t = {time}): {detail}")]
    Divergence {
        step: usize,
        time: f64,
        detail: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure(msg.into())
    }
}
