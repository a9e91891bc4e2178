use thiserror::Error;

/// Error classes used across the crate. Each class maps to a distinct
/// process exit code in the `condfit` binary.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data or configuration.
    #[error("parse error: {0}")]
    Parse(String),
    /// Arguments outside the mathematical domain of an operation
    /// (parameter off the natural parameter space, observation outside
    /// the sample space, probability outside (0,1), ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// An iterative method failed to converge within its budget.
    #[error("non-convergence: {0}")]
    NonConvergence(String),
    /// Sampler diagnostics outside their healthy ranges.
    #[error("diagnostics failure: {0}")]
    Diagnostics(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for this error class (0 is success).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 2,
            Error::Domain(_) => 3,
            Error::NonConvergence(_) => 4,
            Error::Diagnostics(_) => 5,
            Error::Io(_) => 6,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
