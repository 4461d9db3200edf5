use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid value for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("no central difference available at index {index}")]
    NoCentralDifference { index: usize },

    #[error("degenerate heading at index {index}: head and tail coincide")]
    DegenerateHeading { index: usize },

    #[error("trajectory {vehicle_id} is too short: {message}")]
    TooShort { vehicle_id: u64, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("vehicle {vehicle_id} is not present at frame {frame}")]
    VehicleAbsent { vehicle_id: u64, frame: i64 },

    #[error("multi-lane-change trajectory {vehicle_id}: {transitions} lane transitions")]
    MultiLaneChange { vehicle_id: u64, transitions: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
