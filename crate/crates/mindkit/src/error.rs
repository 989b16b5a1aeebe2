//! Crate-wide error types.

use std::path::PathBuf;
use thiserror::Error;

/// Top-level error for all pipeline operations.
#[derive(Debug, Error)]
pub enum MindError {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed for record {index}: {code} ({detail})")]
    InvalidRecord {
        index: usize,
        code: String,
        detail: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("generator transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("generator backend returned status {status}: {body_excerpt}")]
    Backend { status: u16, body_excerpt: String },

    #[error("malformed generator response: {0}")]
    BadResponse(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("numeric fault: {0}")]
    NumericFault(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("answer extraction failed; raw output: {raw:?}")]
    ExtractionFailed { raw: String },
}

impl MindError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MindError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 validation, 2 transport, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            MindError::InvalidRecord { .. } | MindError::Config(_) => 1,
            MindError::Transport { .. } | MindError::Backend { .. } | MindError::BadResponse(_) => {
                2
            }
            MindError::NumericFault(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, MindError>;
