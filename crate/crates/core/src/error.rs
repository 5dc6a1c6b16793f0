use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FlamError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FlamError {
    #[error("position ({x:.6}, {y:.6}) is outside the flow domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("position ({x:.6}, {y:.6}) is outside the map grid")]
    OutOfMap { x: f64, y: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("sensor log is empty")]
    EmptyLog,

    #[error("timestamps do not match at index {index}")]
    TimestampMismatch { index: usize },

    #[error("flow maps are defined on different grids")]
    GridMismatch,

    #[error("optimization diverged after {iterations} iterations (cost {cost:e})")]
    Diverged { iterations: usize, cost: f64 },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FlamError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        FlamError::Config(msg.into())
    }
}
