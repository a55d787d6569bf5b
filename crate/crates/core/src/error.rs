use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input: dimensions, schemas, unknown names.
    #[error("input error: {0}")]
    Input(String),

    /// Argument outside the domain where an evaluation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Weight matrices violate symmetry or definiteness requirements.
    #[error("weight validation failed: {0}")]
    Weights(String),

    #[error("operation not supported: {0}")]
    Unsupported(String),

    /// The reduced KKT system is singular or too ill-conditioned to trust.
    #[error("solver failure: {message} (condition estimate {condition:.3e})")]
    Solver { message: String, condition: f64 },

    #[error("successive linearization did not converge after {iterations} iterations (last change {last_change:.3e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("gain synthesis failed at node {node}: state snapshot condition {condition:.3e}")]
    Synthesis { node: usize, condition: f64 },

    #[error("time stepping failed at node {node}: {message}")]
    Stepping { node: usize, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
