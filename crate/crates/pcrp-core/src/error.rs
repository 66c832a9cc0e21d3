//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty point cloud")]
    EmptyCloud,

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("sample count {requested} exceeds cloud size {available}")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("not enough samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("duplicate object id `{0}` in gallery")]
    DuplicateId(String),

    #[error("empty gallery")]
    EmptyGallery,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed {format} data: {detail}")]
    MalformedFile { format: &'static str, detail: String },

    // The cause is part of the message (the service ships `Display` over the
    // wire), so it is deliberately not re-exposed through `source()`.
    #[error("{path}: {cause}")]
    Io { path: PathBuf, cause: std::io::Error },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, cause: std::io::Error) -> Self {
        Error::Io { path: path.into(), cause }
    }

    pub(crate) fn malformed(format: &'static str, detail: impl Into<String>) -> Self {
        Error::MalformedFile { format, detail: detail.into() }
    }
}
