//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// `Validation` covers malformed inputs and configuration (exit code 1 on the
/// CLI); everything else is a runtime failure (exit code 2).
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input data or configuration.
    #[error("{0}")]
    Validation(String),

    /// A pipeline stage failed; the stage name locates the failure.
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed CSV input.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Malformed JSON input.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True when the error (or its stage-wrapped source) is a validation error.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
