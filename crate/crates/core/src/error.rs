use thiserror::Error;

/// Errors raised by the evaluators, solvers and the scenario loader.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The requested evaluation is not meaningful in the current state,
    /// e.g. the next fixed-interval block is already due.
    #[error("invalid state: {0}")]
    InvalidState(String),
    /// Model parameters violate a structural constraint.
    #[error("configuration error: {0}")]
    Config(String),
    /// A numerical routine failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Scenario or pool input could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 2,
            Error::Domain(_) | Error::InvalidState(_) | Error::Config(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}
