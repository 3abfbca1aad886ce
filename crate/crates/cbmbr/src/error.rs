//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in {context} at flat index {position}")]
    NonFiniteValue {
        context: &'static str,
        position: usize,
    },
    #[error("empty set: {0}")]
    EmptySet(&'static str),
    #[error("k too large: requested {k} clusters from {n} points")]
    KTooLarge { k: usize, n: usize },
    #[error("zero-norm vector in cosine similarity")]
    ZeroVector,
    #[error("bad magic: expected {expected:?}, got {found:?}")]
    BadMagic { expected: [u8; 8], found: [u8; 8] },
    #[error("unsupported embedding file version {0}")]
    VersionUnsupported(u32),
    #[error("truncated file: expected {expected} bytes, got {actual}")]
    TruncatedFile { expected: u64, actual: u64 },
    #[error("trailing data: {0} unexpected bytes after payload")]
    TrailingData(u64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable code, used by the CLI error envelope.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::EmptySet(_) => "EmptySet",
            Error::KTooLarge { .. } => "KTooLarge",
            Error::ZeroVector => "ZeroVector",
            Error::BadMagic { .. } => "BadMagic",
            Error::VersionUnsupported(_) => "VersionUnsupported",
            Error::TruncatedFile { .. } => "TruncatedFile",
            Error::TrailingData(_) => "TrailingData",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidScenario(_) => "InvalidScenario",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
        }
    }
}
