//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated a precondition (dimension mismatch, out-of-range id,
    /// non-finite coordinate, empty key set, ...).
    #[error("argument error: {0}")]
    Argument(String),

    /// A tensor file is malformed. `offset` points at the first bad byte.
    #[error("format error at offset {offset}: {msg}")]
    Format { offset: u64, msg: String },

    /// A PNG input does not satisfy the ingestion contract
    /// (wrong channel count, bit depth, or an undecodable file).
    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// A dense operation was asked to run above its pixel budget.
    #[error("size cap exceeded: {pixels} pixels > dense_size_cap {cap}")]
    SizeCap { pixels: usize, cap: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<image::ImageError> for Error {
    fn from(e: image::ImageError) -> Self {
        Error::Ingestion(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
