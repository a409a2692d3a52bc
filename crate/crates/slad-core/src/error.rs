//! Error type shared across the workspace.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A user-supplied value is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Config file could not be parsed or failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// Checkpoint file is malformed, incompatible, or refused on resume.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged at step {step} (lr {lr}): {reason}")]
    Diverged { step: usize, lr: f64, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for config-class errors, 3 for
    /// runtime failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) | Error::Checkpoint(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
