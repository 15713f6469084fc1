use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] decpep::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Config {
        path: String,
        source: toml::de::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("solver did not reach optimality: {0}")]
    Solver(String),
    #[error("{failed} of {total} solves failed")]
    Partial { failed: usize, total: usize },
}

impl CliError {
    /// 1 for bad input, 2 for solver failure, 3 for partial table failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Solver(_) => 2,
            Self::Partial { .. } => 3,
            Self::Core(decpep::Error::Sdp(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
