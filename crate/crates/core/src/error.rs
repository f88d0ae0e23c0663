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

    #[error("invalid data: {0}")]
    Validation(String),

    #[error("bad magic {found:?} in {path}, expected {expected:?}")]
    Format {
        path: PathBuf,
        found: [u8; 4],
        expected: [u8; 4],
    },

    #[error("unsupported version {found} in {path}")]
    Version { path: PathBuf, found: u32 },

    #[error("truncated file {path}: expected {expected} bytes, found {actual}")]
    Length { path: PathBuf, expected: u64, actual: u64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("class coverage: {0}")]
    Coverage(String),

    #[error("capacity: {0}")]
    Capacity(String),

    #[error("class leakage between pretraining and benchmark classes: {0:?}")]
    Leakage(Vec<u32>),

    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
