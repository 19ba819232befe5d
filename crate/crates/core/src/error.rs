use thiserror::Error;

/// Errors raised by the tensor algebra, solvers and file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("mode index {mode} out of range for a {order}-mode tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("mode {0} appears more than once")]
    DuplicateMode(usize),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("non-finite entry at linear index {0}")]
    NonFinite(usize),

    #[error("matrix is not orthonormal (deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },

    #[error("rank deficient input: {0}")]
    RankDeficient(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("unsupported format version {0}")]
    Version(u16),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
