use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical failure in {op}: {detail}")]
    NumericalFailure { op: &'static str, detail: String },

    #[error("empty artifact: {0}")]
    EmptyArtifact(String),

    #[error("environment: {0}")]
    Environment(String),

    #[error("validation: {0}")]
    Validation(String),

    #[error("format: {0}")]
    Format(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn numerical(op: &'static str, detail: impl Into<String>) -> Self {
        Error::NumericalFailure {
            op,
            detail: detail.into(),
        }
    }
}
