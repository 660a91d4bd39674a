use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the extraction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid arity: {0}")]
    InvalidArity(String),

    #[error("arity mismatch: expected {expected} features, got {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("malformed model: {0}")]
    Model(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("confidence is undefined for a rule with zero cover")]
    UndefinedConfidence,

    #[error("fidelity is undefined when model accuracy is zero")]
    UndefinedFidelity,

    #[error("unsupported architecture: {0}")]
    UnsupportedArchitecture(String),

    #[error("invalid condition: {0}")]
    Condition(String),

    #[error("program is not stratified: {0}")]
    NotStratified(String),

    #[error("input facts do not match program features: {0}")]
    InputFacts(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
