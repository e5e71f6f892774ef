//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors reported by the link simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("invalid frame configuration: {0}")]
    Frame(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pilot guard region conflict: {0}")]
    PilotGuard(String),

    #[error("bit count mismatch: expected {expected} bits, got {got}")]
    BitCount { expected: usize, got: usize },

    #[error("received record too short: need at least {needed} samples, got {got}")]
    RecordTooShort { needed: usize, got: usize },

    #[error("timing metric is identically zero")]
    ZeroMetric,

    #[error(
        "correction window [{start}, {end}) lies outside the received record of {len} samples"
    )]
    WindowOutOfRecord { start: i64, end: i64, len: usize },

    #[error("no pilot copies above the detection threshold")]
    EmptyEstimate,

    #[error("linear solve failed: matrix is singular")]
    Singular,

    #[error("allocation error: {0}")]
    Allocation(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
