use std::path::PathBuf;

use tensorda::Error as CoreError;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_WARNINGS: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Data { path: PathBuf, source: CoreError },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("report serialisation failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data { source, .. } | CliError::Core(source) => core_exit_code(source),
            CliError::Io { .. } => EXIT_DATA,
            CliError::Json(_) => EXIT_FAILURE,
        }
    }
}

fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::InvalidConfig(_) => EXIT_USAGE,
        CoreError::Format(_)
        | CoreError::Truncated { .. }
        | CoreError::Version(_)
        | CoreError::Io(_)
        | CoreError::DimensionMismatch(_)
        | CoreError::NonFinite(_) => EXIT_DATA,
        _ => EXIT_FAILURE,
    }
}

/// Attaches a path to errors raised while reading or writing it.
pub trait WithPath<T> {
    fn at(self, path: &std::path::Path) -> Result<T, CliError>;
}

impl<T> WithPath<T> for Result<T, CoreError> {
    fn at(self, path: &std::path::Path) -> Result<T, CliError> {
        self.map_err(|source| CliError::Data {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl<T> WithPath<T> for Result<T, std::io::Error> {
    fn at(self, path: &std::path::Path) -> Result<T, CliError> {
        self.map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
