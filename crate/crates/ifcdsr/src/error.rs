use std::io;
use std::path::PathBuf;

use ifcdsr_core::Error as CoreError;

/// Errors of the command-line layer, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: CoreError,
    },
    #[error(transparent)]
    Engine(#[from] CoreError),
    #[error("{0}")]
    Data(String),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    pub fn file(path: impl Into<PathBuf>, source: CoreError) -> Self {
        AppError::File { path: path.into(), source }
    }

    /// 1 usage, 2 data, 3 numerical abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Engine(e) | AppError::File { source: e, .. } if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
