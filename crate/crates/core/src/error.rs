use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("insufficient constraints: need at least {needed}, found {found}")]
    InsufficientConstraints { needed: usize, found: usize },

    #[error("too many constraints: {found} exceeds the dense solver cap of {cap}")]
    TooManyConstraints { found: usize, cap: usize },

    #[error("duplicate constraint centers at indices {first} and {second}")]
    DuplicateCenter { first: usize, second: usize },

    #[error("singular system: pivot {pivot} has magnitude {magnitude:e} below threshold {threshold:e}")]
    SingularSystem {
        pivot: usize,
        magnitude: f64,
        threshold: f64,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty shape: {0}")]
    EmptyShape(String),

    #[error("position ({x}, {y}) is closer than one pixel to the image border")]
    Border { x: f64, y: f64 },

    #[error("invalid normal at index {index}: length {length}")]
    InvalidNormal { index: usize, length: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("degenerate placement: {0}")]
    DegeneratePlacement(String),

    #[error("duplicate 3D positions between slices {first_slice} and {second_slice}")]
    DuplicateSlicePositions {
        first_slice: usize,
        second_slice: usize,
    },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by reading or decoding input files.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Parse { .. } | Error::UnsupportedFormat(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
