use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("scenario `{scenario}`: {source}")]
    Core {
        scenario: String,
        #[source]
        source: nls_core::NlsError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Attaches the scenario name to core errors.
pub trait CoreContext<T> {
    fn context(self, scenario: &str) -> Result<T>;
}

impl<T> CoreContext<T> for nls_core::Result<T> {
    fn context(self, scenario: &str) -> Result<T> {
        self.map_err(|source| CliError::Core {
            scenario: scenario.to_string(),
            source,
        })
    }
}
