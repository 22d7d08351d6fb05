use std::path::PathBuf;

use thiserror::Error;

/// Failures of the command-line front end. Each maps to one exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read {path}: {message}")]
    MissingInput { path: PathBuf, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: varimorph::Error,
    },

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const NUMERIC: i32 = 4;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => Self::USAGE,
            CliError::MissingInput { .. } | CliError::Output { .. } => Self::IO,
            CliError::Stage { source, .. } if source.is_io() => Self::IO,
            CliError::Stage { .. } => Self::NUMERIC,
        }
    }

    /// Short tag printed in front of every error line.
    pub fn tag(&self) -> &'static str {
        match self.exit_code() {
            Self::USAGE => "E_USAGE",
            Self::IO => "E_IO",
            _ => "E_NUMERIC",
        }
    }

    /// `varimorph: error[E_TAG]: message` on a single line.
    pub fn render(&self) -> String {
        let msg = self.to_string();
        let line = msg.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("varimorph: error[{}]: {line}", self.tag())
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for varimorph::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
