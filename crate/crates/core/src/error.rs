use thiserror::Error;

/// Errors raised by the library.
///
/// `Parameter` covers malformed inputs; `Refusal` covers valid inputs that
/// exceed a documented enumeration or size cap.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: usize, right: usize },
    #[error("refused: {0}")]
    Refusal(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}

pub(crate) fn refuse<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Refusal(msg.into()))
}
