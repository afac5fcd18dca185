use thiserror::Error;

/// Errors raised by the laboratory. Every precondition violation maps to one
/// variant; numerical sanity failures that indicate a malformed input (rather
/// than a caller mistake) use `Internal`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("bit string of length {0} must have even length")]
    OddLength(usize),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("n = {n} exceeds the exhaustive-check threshold {threshold}")]
    ThresholdExceeded { n: usize, threshold: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown question: {0}")]
    UnknownQuestion(String),

    #[error("question pair {0} is excluded by the test")]
    ExcludedPair(String),

    #[error("phase function inconsistent with adjacency matrix at s = {s}, t = {t}")]
    InconsistentPhase { s: String, t: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed document: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Parse(e.to_string())
    }
}
