use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A scenario value failed validation; `path` locates it in the file.
    #[error("{path}: {reason}")]
    Config { path: String, reason: String },

    #[error("cannot parse {file}: {source}")]
    Toml {
        file: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("cannot read {file}: {source}")]
    Read {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Deadlock, divergence or an emitted result that broke an invariant.
    #[error("aborted: {0}")]
    Aborted(String),

    #[error(transparent)]
    Core(agvsb_core::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<agvsb_core::Error> for CliError {
    fn from(e: agvsb_core::Error) -> Self {
        match e {
            agvsb_core::Error::Deadlock { .. } | agvsb_core::Error::Divergence { .. } => {
                CliError::Aborted(e.to_string())
            }
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    /// Process exit status: 2 for a simulation or training abort, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Aborted(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
