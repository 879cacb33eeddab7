use std::path::PathBuf;

/// Error type shared by every module in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Filesystem failure, tagged with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file exists but its contents do not parse (bad header, truncated
    /// data, malformed line, ...). The message carries location context.
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    /// A caller-supplied parameter is out of range.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// An operation was called on data violating its contract
    /// (wrong channel count, dimension mismatch, non-binary mask, ...).
    #[error("{0}")]
    Contract(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
