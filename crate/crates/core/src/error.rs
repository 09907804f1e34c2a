use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the cohort-selection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("unknown tag `{0}`")]
    UnknownTag(String),
    #[error("unknown document id `{0}`")]
    UnknownDoc(String),
    #[error("span {start}..{end} out of bounds for document `{doc_id}` (length {len})")]
    SpanOutOfBounds {
        doc_id: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("label mismatch: {0}")]
    Mismatch(String),
    #[error("model file: {0}")]
    ModelFile(String),
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

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
