use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid block decomposition: {0}")]
    InvalidDecomposition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid range: r_min = {r_min}, r_max = {r_max}")]
    InvalidRange { r_min: f64, r_max: f64 },

    #[error("memory guard exceeded: {0}")]
    MemoryGuard(String),

    #[error("non-finite value at node {0}")]
    NonFinite(usize),

    #[error("critical exponent: {0}")]
    CriticalExponent(String),

    #[error("degenerate bound: {0}")]
    Degenerate(String),

    #[error("axis index {index} out of range for {m} blocks")]
    IndexOutOfRange { index: usize, m: usize },

    #[error("only {blocks_ge2} blocks of dimension >= 2: use the pairwise two-block route")]
    PairwisePathRequired { blocks_ge2: usize },

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("solver did not converge: {0}")]
    DidNotConverge(String),

    #[error("under-resolved grid: {0}")]
    UnderResolved(String),

    #[error("supersolution certificate violated: min ratio {0}")]
    SupersolutionViolation(f64),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
