use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter spec `{name}`: {reason}")]
    InvalidSpec { name: String, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid component: {0}")]
    InvalidComponent(String),

    #[error("component window [{t_start}, {t_end}] exceeds series of length {len}")]
    WindowOutOfRange {
        t_start: usize,
        t_end: usize,
        len: usize,
    },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("value {value} of `{name}` outside [{lb}, {ub}]")]
    ValueOutOfBounds {
        name: String,
        value: f64,
        lb: f64,
        ub: f64,
    },

    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("{path}: no data rows")]
    EmptyInput { path: String },

    #[error("row {row}, column {column}: cannot parse {cell:?} as a number")]
    NonNumeric {
        row: usize,
        column: usize,
        cell: String,
    },

    #[error("row {row}: time step {found} deviates from {expected} beyond relative tolerance")]
    NonUniformGrid {
        row: usize,
        expected: f64,
        found: f64,
    },

    #[error("row {row}: expected {expected} column(s), found {found}")]
    ColumnCount {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
