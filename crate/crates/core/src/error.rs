use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the localization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: u64, message: String },

    #[error("duplicate sensor id `{0}`")]
    DuplicateSensor(String),

    #[error("sensor `{id}`: coordinate out of range (lat={lat}, lon={lon})")]
    CoordinateOutOfRange { id: String, lat: f64, lon: f64 },

    #[error("unknown sensor id `{0}`")]
    UnknownSensor(String),

    #[error("sensor `{id}`: duplicate timestamp t={t}")]
    DuplicateTimestamp { id: String, t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty trace for sensor `{0}`")]
    EmptyTrace(String),

    #[error("no tick is covered by enough sensors to form an average")]
    NoCoverage,

    #[error("all sites are collinear")]
    Collinear,

    #[error("sites {0} and {1} share the same coordinates")]
    DuplicateSite(usize, usize),

    #[error("insufficient sensors: {have} available, {need} required")]
    InsufficientSensors { have: usize, need: usize },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("triangle {0} is degenerate (zero area)")]
    DegenerateTriangle(usize),

    #[error("point ({lon}, {lat}) lies outside the triangulated hull")]
    OutOfDomain { lon: f64, lat: f64 },

    #[error("grid does not intersect the sensor hull")]
    EmptyGrid,

    #[error("no event detected")]
    NoEvent,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(row: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            row,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
