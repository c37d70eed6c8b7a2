use thiserror::Error;

use crate::vlasov::PicardDiagnostics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid size must be even and at least 4, got {0}")]
    BadGridSize(usize),

    #[error("grid mismatch: expected {expected} sites over length {expected_length}, got {found} sites over length {found_length}")]
    GridMismatch {
        expected: usize,
        expected_length: f64,
        found: usize,
        found_length: f64,
    },

    #[error("configuration with {size} points exceeds truncation level {max_level}")]
    TruncationOverflow { size: usize, max_level: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("operator {0} cannot be applied here")]
    UnsupportedOperator(&'static str),

    #[error("negative value {value} at time index {time_index}, cell {cell}")]
    NegativeInput {
        value: f64,
        time_index: usize,
        cell: usize,
    },

    #[error("time step {dt} violates the stability limit {limit}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("explicit integration went negative ({value}) at t = {time}; reduce the time step")]
    Unstable { value: f64, time: f64 },

    #[error("Picard iteration did not reach tolerance after {} iterations", .0.iterations)]
    PicardNotConverged(Box<PicardDiagnostics>),

    #[error("mortality condition fails (q = {q}); contraction is not guaranteed, pass an override to run anyway")]
    OutOfRegime { q: f64 },

    #[error("logistic reference has a pole at t = {0}")]
    Pole(f64),

    #[error("incompatible bins: {0}")]
    IncompatibleBins(String),
}
