use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the mask pipeline.
#[derive(Debug, Error)]
pub enum DamError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a DAMT file")]
    NotDamt,
    #[error("unsupported DAMT version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported DAMT dtype {0}")]
    UnsupportedDtype(u8),
    #[error("format error: {0}")]
    Format(String),
    #[error("length error: expected {expected} payload bytes, found {actual}")]
    Length { expected: usize, actual: usize },
    #[error("input error: {0}")]
    Input(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("undefined match score: pattern {0} is empty at this size")]
    UndefinedScore(String),
    #[error("row {row} has no unmasked positions; softmax is undefined")]
    FullyMaskedRow { row: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("no sequences accumulated")]
    NoSequences,
}

pub type Result<T, E = DamError> = std::result::Result<T, E>;

impl DamError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DamError::Io { path: path.into(), source }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        DamError::Input(msg.into())
    }
}
