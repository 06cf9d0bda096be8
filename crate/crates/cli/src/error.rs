use std::path::{Path, PathBuf};

use qlink_core::Error as CoreError;
use thiserror::Error;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_IO: u8 = 4;
pub const EXIT_ANALYSIS: u8 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Core { path: PathBuf, source: CoreError },

    #[error(transparent)]
    Bare(#[from] CoreError),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },

    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core { source, .. } | CliError::Bare(source) => core_code(source),
            CliError::Io { .. } | CliError::Csv { .. } | CliError::Json { .. } => EXIT_IO,
        }
    }

    pub fn at(path: &Path) -> impl FnOnce(CoreError) -> CliError + '_ {
        move |source| CliError::Core {
            path: path.to_owned(),
            source,
        }
    }
}

fn core_code(e: &CoreError) -> u8 {
    match e {
        CoreError::Config(_) => EXIT_CONFIG,
        CoreError::Domain(_) | CoreError::Range(_) | CoreError::Analysis(_) => EXIT_ANALYSIS,
        _ => EXIT_IO,
    }
}

pub type CliResult<T> = Result<T, CliError>;
