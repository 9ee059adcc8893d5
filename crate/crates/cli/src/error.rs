use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] closure_lab::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad file {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("training and validation datasets share seed {0}")]
    SeedCollision(u64),
    #[error("{failed} check(s) failed")]
    ChecksFailed { failed: usize },
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn format(path: impl AsRef<std::path::Path>, reason: impl Into<String>) -> Self {
        CliError::Format {
            path: path.as_ref().display().to_string(),
            reason: reason.into(),
        }
    }

    /// Process exit code: 2 usage, 3 instability, 4 failed checks, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Core(closure_lab::Error::Instability { .. }) => 3,
            CliError::ChecksFailed { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
