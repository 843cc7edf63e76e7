use thiserror::Error;

/// Harness failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// Invalid configuration, violated precondition or dimension cap.
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] fockchaos::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numerical(fockchaos::Error::DimensionOverflow { .. }) => 2,
            HarnessError::Numerical(_) | HarnessError::Io(_) | HarnessError::Output(_) => 3,
        }
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Output(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
