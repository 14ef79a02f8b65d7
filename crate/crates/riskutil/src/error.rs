//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("malformed trajectory: {0}")]
    MalformedTrajectory(String),

    #[error("policy undefined at stage {h}, state {s}, accumulated reward {y}")]
    PolicyCoverage { h: usize, s: usize, y: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("empty demonstration dataset")]
    EmptyDataset,

    #[error("sample budget {tau} too small: need at least {required} (one per state-action-stage triple)")]
    BudgetTooSmall { tau: u64, required: u64 },

    #[error("{0}; use Monte-Carlo evaluation instead")]
    ExactCapExceeded(String),

    #[error("enumeration cap exceeded: {0}")]
    EnumerationCapExceeded(String),

    #[error("infeasible constraint set: {0}")]
    Infeasible(String),

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("invalid utility: {0}")]
    InvalidUtility(String),

    #[error("return {0} is off the discretization grid")]
    OffGridReturn(f64),

    #[error("oracle inconsistent with any monotone utility: {0}")]
    InconsistentOracle(String),

    #[error("division guard: {0}")]
    DivisionGuard(String),

    #[error("mismatched input lengths: {0}")]
    MismatchedLengths(String),

    #[error("unknown zoo id: {0}")]
    UnknownZooId(String),

    #[error("schema violation in {path}: {detail}")]
    Schema { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
