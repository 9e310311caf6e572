use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("value iteration did not converge after {sweeps} sweeps (residual {residual:e})")]
    NotConverged { sweeps: usize, residual: f64 },

    #[error("episode already finished; reset before stepping")]
    EpisodeFinished,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid hierarchy: {0}")]
    Hierarchy(String),

    #[error("Q-value {value} for subtask `{subtask}` left the admissible range [{lo}, {hi}]")]
    ValueOutOfBounds { subtask: String, value: f64, lo: f64, hi: f64 },

    #[error("regressor fit failed at sweep {sweep} of subtask `{subtask}`: {message}")]
    Fit { subtask: String, sweep: usize, message: String },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures of the filesystem rather than of a contract.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
