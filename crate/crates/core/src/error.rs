use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series is constant (std {std:e}); z-score normalization is undefined")]
    ConstantSeries { std: f64 },

    #[error("series is empty")]
    EmptySeries,

    #[error("series contains a non-finite value at index {index}")]
    NonFiniteSample { index: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("window at t={t} with depth {depth} reaches before the first sample")]
    OutOfRange { t: usize, depth: usize },

    #[error("integrator misaligned: {0}")]
    ConfigMisaligned(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("non-finite entry in {0}")]
    NonFiniteInput(&'static str),

    #[error("raw reservoir draw has spectral radius 0; redraw with another seed")]
    ZeroSpectralRadius,

    #[error("window of length {actual} is too short (need {needed})")]
    WindowTooShort { needed: usize, actual: usize },

    #[error("{layers} layers requested but delay {delay} only supports up to {delay}")]
    TooManyLayers { layers: usize, delay: usize },

    #[error("insufficient history: need {needed} samples, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("insufficient data: need {needed} samples, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid experiment spec: {0}")]
    SpecInvalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// True for failures caused by the filesystem rather than by the input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
