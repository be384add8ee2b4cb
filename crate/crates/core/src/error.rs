use thiserror::Error;

/// Errors produced across the trainer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration or specification value violates its invariants.
    #[error("invalid specification: {0}")]
    Spec(String),
    /// A runtime input was malformed or out of range.
    #[error("invalid input: {0}")]
    Input(String),
    /// Not enough data to compute the requested quantity.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// An input arrived that is not legal for the current coach phase.
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("encode error: {0}")]
    Encode(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
