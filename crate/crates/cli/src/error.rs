use std::path::{Path, PathBuf};

use ssagcn_core::Error as CoreError;

/// Harness errors, grouped by what the user has to do about them.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{what} not found at {path}; run `{fix}` first")]
    MissingArtifact {
        what: String,
        path: PathBuf,
        fix: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn missing(what: impl Into<String>, path: impl AsRef<Path>, fix: impl Into<String>) -> Self {
        Self::MissingArtifact {
            what: what.into(),
            path: path.as_ref().to_path_buf(),
            fix: fix.into(),
        }
    }

    /// Process exit status: 2 configuration, 3 missing input or artifact,
    /// 4 malformed data, 5 numerical failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingArtifact { .. } => 3,
            CliError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                CoreError::Config(_) => 2,
                CoreError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
                CoreError::Io { .. } => 1,
                CoreError::Parse { .. } | CoreError::Validation(_) | CoreError::Format(_) => 4,
                CoreError::NonFinite(_) => 5,
                CoreError::Shape(_) | CoreError::MissingGrad(_) => 1,
            },
        }
    }

    pub fn category(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "missing-input",
            4 => "data",
            5 => "numeric",
            _ => "internal",
        }
    }
}
