use std::fmt;
use std::path::PathBuf;

use melvq_core::Error;

/// Everything a command can fail with, mapped onto distinct exit statuses.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    File {
        action: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
    Core(Error),
}

pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const AUDIO: i32 = 4;
    pub const CODEBOOK: i32 = 5;
    pub const STREAM: i32 = 6;
    pub const HASH_MISMATCH: i32 = 7;
    pub const INSUFFICIENT_DATA: i32 = 8;
    pub const OTHER: i32 = 9;
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => exit::USAGE,
            Failure::File { .. } => exit::IO,
            Failure::Core(e) => match e {
                Error::Io { .. } => exit::IO,
                Error::UnsupportedAudio(_) | Error::SampleRate { .. } | Error::EmptySignal => exit::AUDIO,
                Error::CodebookFormat(_) | Error::CodebookCorrupt { .. } | Error::ModeMismatch { .. } => exit::CODEBOOK,
                Error::StreamFormat(_) | Error::IndexOutOfRange { .. } => exit::STREAM,
                Error::HashMismatch { .. } => exit::HASH_MISMATCH,
                Error::InsufficientData(_) => exit::INSUFFICIENT_DATA,
                Error::Config(_) | Error::UnknownStrategy { .. } => exit::USAGE,
                Error::Shape(_) | Error::Numerical(_) => exit::OTHER,
            },
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(msg) => write!(f, "{msg}"),
            Failure::File { action, path, source } => write!(f, "cannot {action} {}: {source}", path.display()),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

impl Failure {
    pub fn read(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
        move |source| Failure::File {
            action: "read",
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn write(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
        move |source| Failure::File {
            action: "write",
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}
