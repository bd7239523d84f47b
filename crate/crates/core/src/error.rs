use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the codec pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported audio: {0}")]
    UnsupportedAudio(String),

    #[error("sample rate {found} Hz is not supported, the codec requires {expected} Hz")]
    SampleRate { expected: u32, found: u32 },

    #[error("empty signal")]
    EmptySignal,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index {index} out of range for codebook of size {size}")]
    IndexOutOfRange { index: u32, size: usize },

    #[error("rate mode mismatch: expected {expected}, found {found}")]
    ModeMismatch { expected: String, found: String },

    #[error("malformed codebook file: {0}")]
    CodebookFormat(String),

    #[error("codebook content hash mismatch: stored {stored:016x}, computed {computed:016x}")]
    CodebookCorrupt { stored: u64, computed: u64 },

    #[error("malformed stream: {0}")]
    StreamFormat(String),

    #[error("stream was encoded with codebook {stream:016x} but codebook {codebook:016x} was supplied")]
    HashMismatch { stream: u64, codebook: u64 },

    #[error("insufficient training data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown {kind} '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
