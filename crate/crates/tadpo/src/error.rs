//! Crate-wide error type.

use thiserror::Error;

/// Alias used by every fallible operation in the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value failed validation. The message names the field.
    #[error("invalid config: {0}")]
    Config(String),

    /// A gradient or loss went non-finite; parameters were left untouched.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Shape or layout mismatch between tensors/segments.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Mutation attempted on a frozen buffer.
    #[error("buffer is frozen: {0}")]
    Frozen(String),

    /// File format violation while reading a checkpoint or demo file.
    #[error("format error in {path}: {msg}")]
    Format { path: String, msg: String },

    /// Planner could not produce a usable plan for a world.
    #[error("planning failed: {0}")]
    Planning(String),

    /// Teacher quality below the demonstration-collection floor.
    #[error("teacher below quality floor: {0}")]
    TeacherQuality(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code the CLI maps this error to: 2 for configuration
    /// problems the caller can fix in the config file, 3 for a teacher that
    /// failed its quality floor, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::TeacherQuality(_) => 3,
            _ => 1,
        }
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn format(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), msg: msg.into() }
    }
}
