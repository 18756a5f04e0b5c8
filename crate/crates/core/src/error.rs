//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("SVD did not converge within the sweep cap")]
    ConvergenceFailure,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("column {0} has zero norm")]
    ZeroColumn(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("non-finite objective at iteration {iter}")]
    NonFiniteObjective { iter: u64 },
    #[error("bad magic number {0} in IDX header")]
    BadMagic(u32),
    #[error("truncated IDX file: {0}")]
    TruncatedFile(String),
    #[error("empty selection")]
    EmptySelection,
    #[error("checkpoint version mismatch: expected {expected}, got {got}")]
    VersionMismatch { expected: u32, got: u32 },
    #[error("corrupt document: {0}")]
    CorruptDocument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
