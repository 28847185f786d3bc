use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("format error at row {row}: {reason}")]
    Format { row: usize, reason: String },

    #[error("cannot parse token at row {row}, column {col}: {token:?}")]
    Parse { row: usize, col: usize, token: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("cannot split dataset: {0}")]
    Split(String),

    #[error("signal has a negative sample at index {0}")]
    NegativeInput(usize),

    #[error("signal mass {mass:e} does not exceed threshold {threshold:e}")]
    ZeroMass { mass: f64, threshold: f64 },

    #[error("invalid transport feature: {0}")]
    InvalidFeature(String),

    #[error("warp is not strictly increasing: g'({t}) = {derivative:e}")]
    NonIncreasingWarp { t: f64, derivative: f64 },

    #[error("harmonic order must be nonzero")]
    InvalidOrder,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("vectors span only the zero subspace")]
    DegenerateSpan,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported model format: {0}")]
    ModelFormat(String),

    #[error("model integrity check failed: {0}")]
    Integrity(String),

    #[error("warp generation failed: {0}")]
    Generation(String),

    #[error("I/O error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
