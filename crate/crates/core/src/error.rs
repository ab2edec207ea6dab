use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// The caller passed arguments that do not fit together (shapes, counts).
    #[error("usage error: {0}")]
    Usage(String),

    /// Input data is malformed or contains values we cannot work with.
    #[error("data error: {0}")]
    Data(String),

    /// A configuration value is out of range or incompatible with the data.
    #[error("config error: {0}")]
    Config(String),

    /// Sampling kept producing zero-length weight vectors.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// The requested problem would not fit in memory.
    #[error("resource error: {0}")]
    Resource(String),

    /// A serialized model could not be decoded.
    #[error("format error: {0}")]
    Format(String),

    /// A serialized model was written by an unsupported format version.
    #[error("unsupported model format version {found} (this build reads up to {supported})")]
    Version { found: u32, supported: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
