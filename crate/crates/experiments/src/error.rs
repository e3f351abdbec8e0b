use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical guard: {0}")]
    Numerical(#[from] dispcomp_core::Error),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn config(msg: impl Into<String>) -> Self {
        RunError::Config(msg.into())
    }

    /// Process exit status: 2 for configuration problems, 3 for numerical
    /// guards (wraparound, invalid physics), 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io { .. } => 1,
        }
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;
