use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("invalid shape {0:?}: extents must be positive and match the data length")]
    InvalidShape(Vec<usize>),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("sequence of length {len} is shorter than kernel width {kernel}")]
    SequenceTooShort { len: usize, kernel: usize },

    #[error("symbol {symbol} is outside the vocabulary of size {vocab}")]
    SymbolOutOfVocab { symbol: usize, vocab: usize },

    #[error("class {index} has zero frequency; smooth counts before computing weights")]
    ZeroFrequency { index: usize },

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("checkpoint {path}: {kind}")]
    Checkpoint { path: PathBuf, kind: CheckpointError },

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("bad magic header")]
    BadMagic,
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: String },
    #[error("parameter {name}: stored shape {stored:?} does not match model shape {model:?}")]
    ShapeMismatch {
        name: String,
        stored: Vec<usize>,
        model: Vec<usize>,
    },
    #[error("file is truncated")]
    Truncated,
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("parameter {0} missing from checkpoint")]
    MissingParam(String),
    #[error("record count {found} does not match {expected} records read")]
    CountMismatch { expected: usize, found: usize },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io(_) | Error::Checkpoint { .. } | Error::Empty(_) => 3,
            Error::SymbolOutOfVocab { .. } | Error::ZeroFrequency { .. } => 3,
            Error::ShapeMismatch { .. }
            | Error::InvalidShape(_)
            | Error::NonFinite(_)
            | Error::NotPositiveDefinite { .. }
            | Error::SequenceTooShort { .. }
            | Error::Divergence { .. } => 4,
        }
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
