use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or sizes of two inputs disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A probability table, feature map or parameter violates its invariants.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("step {step} out of range for horizon {horizon}")]
    StepOutOfRange { step: usize, horizon: usize },

    /// The episode ledger could not serve a request in full.
    #[error("episode budget exhausted ({charged} of {requested} episodes charged)")]
    BudgetExhausted { requested: u64, charged: u64 },

    /// Environment file rejected; `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    EnvFile {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

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

    /// True for errors caused by user-supplied configuration or input files.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Dimension(_)
                | Error::InvalidModel(_)
                | Error::StepOutOfRange { .. }
                | Error::EnvFile { .. }
                | Error::Json(_)
        )
    }
}
