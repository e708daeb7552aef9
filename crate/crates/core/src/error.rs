use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A point outside the support of a density, or a zero density where a
    /// positive one is required.
    #[error("domain error: {0}")]
    Domain(String),

    /// The target/proposal ratio has no finite upper bound.
    #[error("unbounded density ratio: {0}")]
    Unbounded(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A selection loop hit its safety cap.
    #[error("{what} did not terminate within {cap} steps")]
    NonTermination { what: &'static str, cap: u64 },

    /// A transmitted message could not be decoded.
    #[error("decode error: {0}")]
    Decode(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
