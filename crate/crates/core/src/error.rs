use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("space mismatch: expected `{expected}`, got `{found}`")]
    SpaceMismatch { expected: String, found: String },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e}, target {tol:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
        /// Best iterate reached before giving up.
        best: Vec<f64>,
    },

    #[error("minimizing movements aborted at step {step}: {source}")]
    FlowAborted {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
