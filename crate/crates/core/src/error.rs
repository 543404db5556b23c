use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImdError {
    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("index out of range: {index} (limit {limit})")]
    OutOfRange { index: usize, limit: usize },
    #[error("retry budget exhausted: {0}")]
    RetryExhausted(String),
    #[error("step {step}: {source}")]
    Step {
        step: u32,
        #[source]
        source: Box<ImdError>,
    },
    #[error("scene {scene}, value {value}: {source}")]
    Sweep {
        scene: usize,
        value: String,
        #[source]
        source: Box<ImdError>,
    },
    #[error("malformed PGM: {0}")]
    Pgm(String),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = ImdError> = std::result::Result<T, E>;

impl ImdError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        ImdError::InvalidParameter(msg.into())
    }

    pub(crate) fn at_step(self, step: u32) -> Self {
        ImdError::Step {
            step,
            source: Box::new(self),
        }
    }
}
