//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the toolkit.
///
/// The split mirrors how callers react: `Config` means the request was
/// malformed and nothing ran; `Numeric` means a computation started and hit
/// non-finite values or a divergence; `Io` wraps persistence failures.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid dimensions, parameters out of range, mismatched shapes.
    #[error("configuration error: {0}")]
    Config(String),

    /// Non-finite values or a diverging computation, with context.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
