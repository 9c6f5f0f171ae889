use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rating list is empty")]
    EmptyRatings,
    #[error("rating level {level} outside 1..={num_levels}")]
    InvalidLevel { level: i64, num_levels: usize },
    #[error("value {value} outside [{start}, {end}]")]
    OutOfRange { value: f64, start: f64, end: f64 },
    #[error("standard deviation must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid quality scale: {0}")]
    InvalidScale(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("scale mismatch: {0}")]
    ScaleMismatch(String),
    #[error("invalid labels: {0}")]
    InvalidLabels(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    Numeric(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("validation error in entry {entry}: {message}")]
    Validation { entry: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: cannot decode image: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("no results found in {0}")]
    NoResults(PathBuf),
}

impl Error {
    /// Stable machine-readable kind, used in the CLI's stderr JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyRatings => "EmptyRatings",
            Error::InvalidLevel { .. } => "InvalidLevel",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::InvalidSigma(_) => "InvalidSigma",
            Error::DegenerateFit(_) => "DegenerateFit",
            Error::InvalidScale(_) => "InvalidScale",
            Error::InvalidDistribution(_) => "InvalidDistribution",
            Error::ScaleMismatch(_) => "ScaleMismatch",
            Error::InvalidLabels(_) => "InvalidLabels",
            Error::Shape(_) => "ShapeError",
            Error::Numeric(_) => "NumericError",
            Error::Config(_) => "ConfigError",
            Error::UndefinedCorrelation(_) => "UndefinedCorrelation",
            Error::Parse { .. } => "ParseError",
            Error::Validation { .. } => "ValidationError",
            Error::Io { .. } => "IoError",
            Error::Decode { .. } => "DecodeError",
            Error::Checkpoint(_) => "CheckpointError",
            Error::NoResults(_) => "NoResults",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
