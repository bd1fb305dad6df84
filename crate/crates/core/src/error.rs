use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("eigenvalue {index} is not strictly positive: {value}")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    #[error("basis is not orthogonal: Gram deviation {deviation:e} exceeds {tolerance:e}")]
    NonOrthogonalBasis { deviation: f64, tolerance: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("target eigenvalues are not a permutation of the source eigenvalues")]
    MultisetMismatch,

    #[error("rotation for eigenvalue block {block} must be {expected}x{expected}, found {rows}x{cols}")]
    BlockShapeMismatch {
        block: usize,
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("rotation for eigenvalue block {block} is not orthogonal (deviation {deviation:e})")]
    NonOrthogonalRotation { block: usize, deviation: f64 },

    #[error("driver cannot be normalized to unit bracket rate: {0}")]
    NonNormalizable(String),

    #[error("jump size must be nonzero")]
    ZeroJumpSize,

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("time {time} is not a node of the path grid")]
    GridMismatch { time: f64 },

    #[error("invalid configuration at `{key}`: {reason}")]
    ConfigInvalid { key: String, reason: String },

    #[error("configuration file not found: {}", .0.display())]
    ConfigNotFound(PathBuf),

    #[error("unknown check `{name}`; valid checks: {valid}")]
    UnknownCheck { name: String, valid: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(what: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            what,
            expected,
            found,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
