use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("unknown run '{0}'")]
    UnknownRun(String),

    #[error(transparent)]
    Core(#[from] plasma2d_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunnerError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        RunnerError::Io { path: path.display().to_string(), source }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::ConfigInvalid(_) | RunnerError::UnknownRun(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = RunnerError> = std::result::Result<T, E>;
