use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("pixel ({u}, {v}) outside {width}x{height} raster")]
    OutOfBounds {
        u: i64,
        v: i64,
        width: usize,
        height: usize,
    },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("relative pose is not compilable: residual roll {roll_deg:.4} deg exceeds {limit_deg} deg")]
    NotCompilable { roll_deg: f64, limit_deg: f64 },

    #[error("annotation parse error at {location}: {message}")]
    Annotation { location: String, message: String },

    #[error("manifest view {view}: {reason}")]
    ManifestView { view: usize, reason: String },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("bundle format: {0}")]
    Format(String),

    // the io error is part of the message rather than a chained source, so
    // reports that walk the chain do not print it twice
    #[error("manifest view {view}: {path}: {cause}")]
    ViewIo {
        view: usize,
        path: PathBuf,
        cause: std::io::Error,
    },

    #[error("{path}: {cause}")]
    Io { path: PathBuf, cause: std::io::Error },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, cause: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause,
        }
    }

    /// True for errors caused by the filesystem rather than by content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::ViewIo { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
