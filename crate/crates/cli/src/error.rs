use std::path::PathBuf;

use regretlab_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("model `{model}` diverged: {source}")]
    Divergence {
        model: String,
        #[source]
        source: CoreError,
    },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown {what} `{name}` (expected one of: {expected})")]
    Unknown {
        what: &'static str,
        name: String,
        expected: String,
    },

    #[error("property suite `{0}` failed")]
    SuiteFailed(String),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Divergence { .. } | CliError::Core(CoreError::Divergence { .. }) => 2,
            CliError::SuiteFailed(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn in_model(model: &str, err: CoreError) -> Self {
        match err {
            CoreError::Divergence { .. } => CliError::Divergence {
                model: model.to_string(),
                source: err,
            },
            other => CliError::config(format!("models[{model}]"), other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
