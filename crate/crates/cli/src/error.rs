use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(semtrans_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: malformed tensor file: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("missing files: {0}")]
    MissingFiles(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl From<semtrans_core::Error> for CliError {
    fn from(e: semtrans_core::Error) -> Self {
        match e {
            semtrans_core::Error::NonFinite(what) => CliError::Numeric(format!("non-finite values in {what}")),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn json(path: &Path, source: serde_json::Error) -> Self {
        CliError::Json { path: path.to_path_buf(), source }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Core(_) | CliError::Format { .. } | CliError::Json { .. } => {
                EXIT_VALIDATION
            }
            CliError::Io { .. } | CliError::MissingFiles(_) => EXIT_IO,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}
