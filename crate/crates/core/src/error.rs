use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {path}")]
    FileNotFound { path: PathBuf },
    #[error("unsupported image format for {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("corrupt image {path}: {reason}")]
    CorruptImage { path: PathBuf, reason: String },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid downsample factor {factor} for {width}x{height} image")]
    InvalidFactor {
        factor: usize,
        width: usize,
        height: usize,
    },
    #[error("degenerate image: constant intensity")]
    DegenerateImage,
    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("DoG needs at least 2 pyramid levels, got {0}")]
    InsufficientLevels(usize),
    #[error("DoG stack is empty")]
    EmptyStack,
    #[error("neighborhood must be an odd integer >= 3, got {0}")]
    InvalidNeighborhood(usize),
    #[error("cannot split {levels} levels across {workers} workers")]
    TooManyWorkers { levels: usize, workers: usize },
    #[error("worker failed while computing scale indices {indices:?}")]
    WorkerFailure { indices: Vec<usize> },
    #[error("insufficient calibration data: {0}")]
    InsufficientData(String),
    #[error("all calibration counts are zero")]
    AllCountsZero,
    #[error("fitted slope {0} is not negative; counts do not decrease with deviation")]
    NonDecreasingFit(f64),
    #[error("invalid blob scale range [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error("invalid scale grid: {0}")]
    InvalidGrid(String),
    #[error("invalid stretch fractions: {0}")]
    InvalidStretch(String),
    #[error("invalid benchmark spec: {0}")]
    InvalidBenchSpec(String),
    #[error("calibration was produced with different pipeline parameters (hash {expected} != {actual})")]
    CalibrationMismatch { expected: String, actual: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
