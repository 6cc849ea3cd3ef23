use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("could not parse config: {0}")]
    Parse(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{0}")]
    Usage(String),
    #[error("numerical divergence: {0}")]
    Divergence(String),
    #[error("equilibrium solver failed: {0}")]
    Newton(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("analysis failed: {0}")]
    Analysis(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        }
    }

    /// 1 for invalid input or I/O, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Divergence(_) | CliError::Newton(_) | CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}
