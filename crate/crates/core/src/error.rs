use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violated an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),
    /// Text input could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
    /// A configured enumeration or memory cap would be exceeded.
    #[error("resource limit: {0}")]
    Resource(String),
    /// A float computation drifted outside its admissible range.
    #[error("numerical instability: {0}")]
    NumericalInstability(String),
    /// An internal invariant failed; indicates a bug.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Parse(_) => 2,
            Error::Resource(_) => 3,
            Error::NumericalInstability(_) | Error::Invariant(_) => 4,
        }
    }
}
