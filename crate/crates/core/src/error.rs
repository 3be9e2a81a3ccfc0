use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("out of bounds: {0}")]
    Bounds(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("enumeration refused: {0}")]
    OracleGuard(String),

    #[error("sampler initialization failed: {0}")]
    Initialization(String),

    #[error("model {model}, stage `{stage}`: {source}")]
    Stage {
        model: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {msg}", path.display())]
    Artifact { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_stage(self, model: usize, stage: &'static str) -> Self {
        Error::Stage {
            model,
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn artifact(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Artifact {
            path: path.into(),
            msg: msg.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
