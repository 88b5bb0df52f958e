use std::path::{Path, PathBuf};

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{0}")]
    Input(String),

    #[error("every seed diverged")]
    AllDiverged,

    #[error("gradient check failed")]
    CheckFailed,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::AllDiverged => 3,
            CliError::CheckFailed => 1,
            CliError::Io { .. } => 4,
        }
    }
}

impl From<ordembed::Error> for CliError {
    fn from(e: ordembed::Error) -> Self {
        match e {
            ordembed::Error::Io { path, source } => CliError::Io { path, source },
            ordembed::Error::Diverged(_) => CliError::AllDiverged,
            other => CliError::Input(other.to_string()),
        }
    }
}
