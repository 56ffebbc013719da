use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("{path}:{line}: malformed header: {reason}")]
    MalformedHeader { path: PathBuf, line: usize, reason: String },

    #[error("{path}:{line}: malformed point record: {reason}")]
    MalformedLine { path: PathBuf, line: usize, reason: String },

    #[error("{path}:{line}: label {label} out of range for {parts} parts")]
    LabelOutOfRange { path: PathBuf, line: usize, label: u64, parts: usize },

    #[error("{path}:{line}: non-finite coordinate")]
    NonFiniteCoordinate { path: PathBuf, line: usize },

    #[error("{path}: malformed binary set: {reason}")]
    MalformedBinary { path: PathBuf, reason: String },

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("invalid part vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("vocabulary mismatch: expected {expected} parts, found {found} ({context})")]
    VocabMismatch { expected: usize, found: usize, context: String },

    #[error("set is empty: {0}")]
    EmptySet(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CoreError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io { path: path.into(), source }
    }
}
