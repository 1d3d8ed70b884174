use std::path::PathBuf;

use thiserror::Error;

/// An invariant of a domain value does not hold.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid {field}: {message}")]
pub struct ValidationError {
    pub field: &'static str,
    pub message: String,
}

impl ValidationError {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntensityError {
    /// The destructiveness integral is exactly zero: nothing moved.
    #[error("quiescent record: destructiveness integral is zero")]
    Quiescent,
    #[error("undefined intensity: destructiveness integral {0} is not a positive number")]
    Undefined(f64),
    #[error("band {label} [{f_low}, {f_high}] Hz is not covered by the spectrum grid: {reason}")]
    Coverage {
        label: String,
        f_low: f64,
        f_high: f64,
        reason: String,
    },
    #[error("band {0} is quiescent: averaged destructiveness integral is zero")]
    QuiescentBand(String),
    #[error("no usable components for station {0}")]
    NoComponents(String),
    #[error("components belong to different stations: {0} and {1}")]
    MixedStations(String, String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

impl IntensityError {
    /// True when the failure means "no shaking" rather than bad input.
    pub fn is_quiescent(&self) -> bool {
        matches!(self, Self::Quiescent | Self::QuiescentBand(_))
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: row {row}: {message}")]
    Row {
        path: PathBuf,
        row: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Dataset { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dataset(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Dataset {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MappingError {
    #[error("no observations to interpolate")]
    Empty,
    #[error("observations mix bands {0} and {1}")]
    MixedBands(String, String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}
