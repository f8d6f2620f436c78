use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the placement pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown sensor location '{0}'")]
    UnknownLocation(String),

    #[error("unknown event source '{0}'")]
    UnknownEvent(String),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("placement has no sensors")]
    EmptyPlacement,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{undetected} event(s) undetected and penalty policy rejects the placement")]
    Undetected { undetected: usize },

    #[error("enumeration of {count} items exceeds cap {cap}; use the evolutionary engine instead")]
    CapExceeded { count: u128, cap: u128 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite objective for placement {0}")]
    NonFinite(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
