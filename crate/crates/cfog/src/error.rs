//! Error types shared across the crate.

use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum CfogError {
    /// A parameter violated its documented invariant.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// A match was skipped because a template or search footprint left the
    /// image bounds.
    #[error("match skipped: {0}")]
    MatchSkipped(String),

    /// Least-squares fitting failed (too few points or a rank-deficient
    /// design matrix).
    #[error("fit failed: {0}")]
    Fit(String),

    /// Triangulation could not be built from the given points.
    #[error("tin failed: {0}")]
    Tin(String),

    /// Raster or sidecar file I/O failed.
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },

    /// A raster or sidecar file was syntactically invalid.
    #[error("bad file format in {path}: {message}")]
    Format { path: PathBuf, message: String },

    /// A run configuration document was invalid.
    #[error("config error: {0}")]
    Config(String),
}

impl CfogError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CfogError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        CfogError::Format {
            path: path.into(),
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CfogError>;
