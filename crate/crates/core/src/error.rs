use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("index {index} out of range for {what} of length {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("exact enumeration over {bits} binary variables exceeds the limit of {limit}")]
    SizeGuard { bits: usize, limit: usize },

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed {format} data at byte offset {offset}: {reason}")]
    Format {
        format: &'static str,
        offset: u64,
        reason: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(format: &'static str, offset: u64, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            offset,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
