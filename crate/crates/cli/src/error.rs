use std::path::PathBuf;

use thiserror::Error;

/// Failures of the scenario runner, mapped onto process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: hardylab_core::Error,
    },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed artifact {}: {msg}", path.display())]
    Artifact { path: PathBuf, msg: String },
}

impl CliError {
    pub fn stage(stage: impl Into<String>) -> impl FnOnce(hardylab_core::Error) -> CliError {
        let stage = stage.into();
        move |source| CliError::Stage { stage, source }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// 2 for configuration problems, 1 for everything that fails at run time.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
