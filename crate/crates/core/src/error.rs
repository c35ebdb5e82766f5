//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input has the wrong dimensionality for the operation.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    /// A parameter or argument violates its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A byte stream or text file does not follow its declared format.
    #[error("format error: {0}")]
    Format(String),

    /// A stream ended before its declared length.
    #[error("truncated input: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },

    /// Two inputs that must agree (e.g. image and label counts) do not.
    #[error("inconsistent data: {0}")]
    Inconsistent(String),

    /// Index outside the valid range.
    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
