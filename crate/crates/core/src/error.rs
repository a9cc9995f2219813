use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),
    /// A numerical routine did not converge.
    #[error("numeric error: {message} (after {iterations} iterations)")]
    Numeric { message: String, iterations: usize },
    /// The requested computation exceeds its work budget.
    #[error("resource limit: {0}")]
    Resource(String),
    /// A test or schedule cannot be built from the given inputs.
    #[error("construction error: {0}")]
    Construction(String),
    /// Hypothesis and alternative coincide, so no test can separate them.
    #[error("degenerate: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
