use thiserror::Error;

/// Errors raised by the factorization drivers and their building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("requested rank {requested} exceeds numerical rank {numerical}")]
    RankDeficient { requested: usize, numerical: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("detected affine/linear dimension {detected}, expected {expected}")]
    RankMismatch { expected: usize, detected: usize },

    #[error("candidate space 2^{bits} exceeds the enumeration cap 2^{cap}")]
    CandidateOverflow { bits: usize, cap: usize },

    #[error("no exact factorization: relative residual {relative_residual:e}")]
    NoExactFactorization { relative_residual: f64 },

    #[error("{vertices} vertices found for rank {rank}; no simplex-feasible subset within {budget} subsets")]
    AmbiguousSelection { vertices: usize, rank: usize, budget: usize },

    #[error("only {found} distinct rounded candidates, {needed} needed")]
    CandidatePoolExhausted { found: usize, needed: usize },

    #[error("no well-conditioned row subset found after {attempts} attempts")]
    DegenerateRows { attempts: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at row {row}, column {col}: {message}")]
    Parse { row: usize, col: usize, message: String },

    #[error("ragged rows: row {row} has {found} fields, expected {expected}")]
    RaggedRows { row: usize, expected: usize, found: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error comes from the algorithms rather than from bad input
    /// or I/O.
    pub fn is_algorithmic(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::ConvergenceFailure { .. }
                | Error::RankMismatch { .. }
                | Error::CandidateOverflow { .. }
                | Error::NoExactFactorization { .. }
                | Error::AmbiguousSelection { .. }
                | Error::DegenerateRows { .. }
                | Error::CandidatePoolExhausted { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
