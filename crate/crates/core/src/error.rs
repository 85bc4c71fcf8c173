use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),

    /// A record failed a domain invariant and was refused.
    #[error("rejected: {0}")]
    Rejected(String),

    #[error("invalid request: {0}")]
    Request(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("blob {checksum} is corrupt: content hashes to {actual}")]
    Corruption { checksum: String, actual: String },

    /// A persisted table failed its checksum or referential checks.
    #[error("integrity error in {file} line {line}: {reason}")]
    Integrity {
        file: String,
        line: usize,
        reason: String,
    },

    #[error("snapshot format version {found} is not supported (expected {expected})")]
    Migration { found: u32, expected: u32 },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data rather than the environment.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Config(_))
    }
}
