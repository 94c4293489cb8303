use thiserror::Error;

/// Crate-wide error type. The variants map onto the CLI exit codes:
/// config errors (2), certification failures (3), numerical failures (4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("fields live on different grids ({0})")]
    GridMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("certification failure [{condition}]: {detail}")]
    Certification { condition: String, detail: String },

    #[error("numerical failure in {stage}: {detail}")]
    Numerical { stage: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn numerical(stage: &str, detail: impl Into<String>) -> Self {
        Error::Numerical {
            stage: stage.to_string(),
            detail: detail.into(),
        }
    }

    pub fn certification(condition: &str, detail: impl Into<String>) -> Self {
        Error::Certification {
            condition: condition.to_string(),
            detail: detail.into(),
        }
    }

    /// Process exit code for the CLI: 2 config, 3 certification, 4 numerical/other.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            Error::Certification { .. } => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
