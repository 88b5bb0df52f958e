use std::path::PathBuf;

use crate::optim::EpochTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite input: {0}")]
    NumericInput(String),

    #[error("index {index} out of range for {n} objects")]
    Range { index: usize, n: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("optimizer diverged: {0}")]
    Diverged(Box<Divergence>),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// State recovered when an optimizer run blows up.
#[derive(Debug, Clone)]
pub struct Divergence {
    pub epoch: usize,
    pub reason: String,
    /// Last snapshot whose entries were all finite.
    pub last_finite: Vec<f64>,
    pub trace: Vec<EpochTrace>,
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "epoch {}: {}", self.epoch, self.reason)
    }
}
