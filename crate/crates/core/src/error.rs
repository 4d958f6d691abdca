//! Error taxonomy shared by the whole crate.
//!
//! Variants are grouped by how a caller should react: `Io` and `Parse` point
//! at a file, `Validation` and friends describe bad data or bad arguments,
//! and `Internal` flags a broken invariant that is a bug, not a user error.

use std::path::PathBuf;

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Filesystem failure (missing file, unwritable directory, ...).
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// File exists but its contents do not decode as the expected format.
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// Structurally valid data that violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A cue joint fell on or behind the camera plane during projection.
    #[error("cue joint behind camera at frame {frame}, slot {slot}")]
    BehindCamera { frame: usize, slot: &'static str },

    /// Tensor or sequence dimensions disagree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A condition payload was handed to an adapter of a different kind.
    #[error("condition mismatch: adapter expects {expected}, got {found}")]
    ConditionMismatch {
        expected: &'static str,
        found: &'static str,
    },

    /// Invariant breakage that indicates a bug in this crate.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CoreError {
    /// Wraps an i/o error with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }

    /// Builds a parse error for `path` from any displayable cause.
    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CoreError::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
