use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid trace: {0}")]
    Trace(String),

    #[error("empty trace")]
    EmptyTrace,

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("row {row}: cannot use `{value}` as a sample")]
    BadCell { row: usize, value: String },

    #[error("non-positive local mean at index {0}")]
    NonPositiveLocalMean(usize),

    #[error("degenerate range: all values equal {0}")]
    DegenerateRange(f64),

    #[error("zero-variance trace has no autocorrelation")]
    ZeroVariance,

    #[error("correlation never drops below {threshold} within {max_lag} lags; increase max_lag")]
    NoCrossing { threshold: f64, max_lag: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("training diverged at epoch {0}")]
    Diverged(usize),

    #[error("least-squares system is rank deficient (condition estimate {0:e})")]
    RankDeficient(f64),

    #[error("model file: {0}")]
    Format(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Tags an error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage { stage, source: Box::new(other) },
        }
    }

    /// Pipeline stage name, if the error was tagged with one.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
