use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = OccError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum OccError {
    #[error("index {index:?} out of range for grid dims {dims:?}")]
    OutOfRange { index: [usize; 3], dims: [usize; 3] },

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverNotConverged { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("incompatible grids: {0}")]
    IncompatibleGrid(String),

    #[error("incompatible shapes: {0}")]
    IncompatibleShape(String),

    #[error("undefined loss: {0}")]
    UndefinedLoss(String),

    #[error("invalid loss input: {0}")]
    InvalidLoss(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("parse error at {path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<OccError>,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl OccError {
    pub fn in_stage(self, stage: &'static str) -> Self {
        OccError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        OccError::MalformedFile {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

/// Tags the error of a pipeline stage.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
