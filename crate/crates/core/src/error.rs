//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("shape mismatch: {context} (expected {expected}, got {actual})")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("model not stochastic")]
    NotStochastic,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("separation detected")]
    Separation,

    #[error("did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("training diverged at epoch {0}: loss is not finite")]
    Diverged(usize),

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("parse error in {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("audio error: {0}")]
    Audio(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
