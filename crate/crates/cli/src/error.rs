use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] hofa_core::Error),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("usage: {0}")]
    Usage(String),
}

impl CliError {
    /// Stable process exit codes, documented in the README.
    pub fn exit_code(&self) -> i32 {
        use hofa_core::Error as E;
        match self {
            CliError::Io { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                E::Parse(_) => 3,
                E::BudgetExceeded { .. } => 4,
                E::DimensionMismatch(_) | E::NotEmbedding { .. } => 5,
                E::InvalidPrime(_) | E::InvalidArgument(_) | E::NoEnumerator(_) => 6,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
