use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FmclpError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("unsupported norm/dimension combination: {0}")]
    Unsupported(String),

    #[error("invalid OWA weights: {0}")]
    InvalidWeights(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("p = {p} exceeds the number of candidate locations m = {m}")]
    TooManyFacilities { p: usize, m: usize },

    #[error("enumeration would visit {states} states, cap is {cap}")]
    CapExceeded { states: u128, cap: u128 },

    #[error("inconsistent baseline: {0}")]
    InconsistentBaseline(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, FmclpError>;

impl From<std::io::Error> for FmclpError {
    fn from(e: std::io::Error) -> Self {
        FmclpError::Io(e.to_string())
    }
}
