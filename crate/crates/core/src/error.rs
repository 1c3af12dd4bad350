use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice size {n}^{d} overflows addressable memory")]
    Size { n: usize, d: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The estimator has no value at this query: every kernel weight vanished.
    #[error("zero kernel weight sum at query {index} ({point:?})")]
    ZeroWeight { index: usize, point: Vec<f64> },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("unsupported format: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
