use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box ({x1}, {y1}, {x2}, {y2}): corners must be finite with x1 <= x2 and y1 <= y2")]
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },

    #[error("invalid shape {w} x {h}: both sides must be positive")]
    InvalidShape { w: f64, h: f64 },

    #[error("invalid anchor config: {0}")]
    InvalidConfig(String),

    #[error("level index {index} out of range ({levels} levels)")]
    LevelOutOfRange { index: usize, levels: usize },

    #[error("invalid image size {width} x {height}")]
    InvalidImageSize { width: f64, height: f64 },

    #[error("ground-truth corpus is empty")]
    EmptyCorpus,

    #[error("invalid optimizer parameters: {0}")]
    InvalidDeParams(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("score {score} outside [0, 1]")]
    InvalidScore { score: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),
}
