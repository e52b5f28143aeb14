use std::io;

use thiserror::Error;

/// Coarse failure category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad configuration, malformed input files or I/O failures.
    Config,
    /// Not enough usable data (OOV terms, too few pairs, single class, ...).
    Data,
    /// A numerical procedure failed or hit an undefined quantity.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate word '{0}'")]
    DuplicateWord(String),

    #[error("word '{0}' has a zero vector")]
    ZeroVector(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid kernel specification: {0}")]
    InvalidKernel(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("requested {requested} components but only {available} are available (rank)")]
    RankDeficient { requested: usize, available: usize },

    #[error("matrix is not symmetric (max deviation {0:e})")]
    NotSymmetric(f64),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("'{0}' has no component left after neutralization")]
    FullyNeutralized(String),

    #[error("degenerate equality set member '{0}': its bias component equals the set mean")]
    DegenerateMember(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_)
            | Error::Json(_)
            | Error::Parse { .. }
            | Error::DuplicateWord(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidArgument(_)
            | Error::InvalidKernel(_) => ErrorKind::Config,
            Error::InsufficientData(_) | Error::RankDeficient { .. } => ErrorKind::Data,
            Error::ZeroVector(_)
            | Error::NotSymmetric(_)
            | Error::NonFinite(_)
            | Error::FullyNeutralized(_)
            | Error::DegenerateMember(_)
            | Error::Numerical(_) => ErrorKind::Numerical,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
