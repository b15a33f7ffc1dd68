use std::path::{Path, PathBuf};

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed input files, configuration or command line.
    #[error("{0}")]
    Input(String),

    /// A chain or summary failed numerically.
    #[error("{message}")]
    Numerical {
        message: String,
        /// Context written to the diagnostics file.
        context: Vec<(String, String)>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Classifies a library error raised while sampling or summarizing.
    pub fn from_core(err: compreg_core::Error, context: Vec<(String, String)>) -> Self {
        if err.is_numerical() {
            CliError::Numerical {
                message: err.to_string(),
                context,
            }
        } else {
            let prefix = context
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(", ");
            CliError::Input(if prefix.is_empty() {
                err.to_string()
            } else {
                format!("{prefix}: {err}")
            })
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Numerical { .. } => 3,
        }
    }
}
