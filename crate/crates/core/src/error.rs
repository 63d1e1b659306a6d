use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema error: missing column(s) {missing:?}")]
    Schema { missing: Vec<String> },

    #[error("data error at row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("training setup error: {0}")]
    TrainingSetup(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("grid search failed: {0}")]
    Grid(String),

    #[error("incompatible model and dataset: {0}")]
    Incompatible(String),

    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 run failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Incompatible(_) => 2,
            Error::Schema { .. }
            | Error::Row { .. }
            | Error::Data(_)
            | Error::Consistency(_)
            | Error::Split(_)
            | Error::Csv(_)
            | Error::Io { .. }
            | Error::Checkpoint { .. } => 3,
            Error::Dimension { .. }
            | Error::Contract(_)
            | Error::TrainingSetup(_)
            | Error::Diverged { .. }
            | Error::Grid(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
