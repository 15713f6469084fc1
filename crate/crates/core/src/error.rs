use decpep_sdp::SdpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0} is not registered in this problem")]
    UnregisteredPoint(usize),
    #[error("function value {0} is not registered in this problem")]
    UnregisteredFValue(usize),
    #[error("LMI block '{label}' is not square")]
    NonSquareLmi { label: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("graph is not connected")]
    Disconnected,
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
