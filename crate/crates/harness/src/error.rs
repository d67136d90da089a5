use std::path::PathBuf;

use thiserror::Error;

/// Failures of the harness, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("stage `{stage}` failed: {source}")]
    Numerical {
        stage: &'static str,
        #[source]
        source: zvonkin::Error,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => EXIT_CONFIG,
            HarnessError::Verification(_) => EXIT_VERIFICATION,
            HarnessError::Numerical { .. } | HarnessError::Io { .. } => EXIT_NUMERICAL,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Attaches a stage name to a core error.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> HarnessResult<T>;
}

impl<T> StageExt<T> for zvonkin::Result<T> {
    fn stage(self, stage: &'static str) -> HarnessResult<T> {
        self.map_err(|source| HarnessError::Numerical { stage, source })
    }
}
