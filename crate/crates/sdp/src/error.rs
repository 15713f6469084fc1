use thiserror::Error;

/// Structural problems detected when an [`SdpProblem`](crate::SdpProblem) is built
/// or when a candidate solution is checked against one.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SdpError {
    #[error("block {block} has dimension 0")]
    EmptyBlock { block: usize },
    #[error("term references block {block}, but the problem has {n_blocks} blocks")]
    UnknownBlock { block: usize, n_blocks: usize },
    #[error("entry ({row}, {col}) is outside block {block} of dimension {dim}")]
    EntryOutOfRange {
        block: usize,
        row: usize,
        col: usize,
        dim: usize,
    },
    #[error("entry ({row}, {col}) of block {block} is below the diagonal; use row <= col")]
    LowerTriangleEntry {
        block: usize,
        row: usize,
        col: usize,
    },
    #[error("free variable {index} out of range ({n_free} declared)")]
    FreeOutOfRange { index: usize, n_free: usize },
    #[error("non-finite coefficient in {context}")]
    NonFinite { context: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),
    #[error("malformed dump at line {line}: {message}")]
    Parse { line: usize, message: String },
}
