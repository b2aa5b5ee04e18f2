use thiserror::Error;

use crate::lasso::LassoFit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} has zero norm")]
    ZeroColumn(usize),
    #[error("matrix columns are not normalized")]
    NotNormalized,
    #[error("operation needs at least {needed} columns, got {got}")]
    TooFewColumns { needed: usize, got: usize },
    #[error("index set is empty")]
    EmptyIndexSet,
    #[error("row count mismatch: {left} vs {right}")]
    RowMismatch { left: usize, right: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),
    #[error("{name} = {value} is out of range: {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("enumeration of {count} subsets exceeds the cap of {cap}")]
    TooLarge { count: u128, cap: u128 },
    #[error("no admissible subset: every {s}-subset has sigma_min below {rho_minus}")]
    NoAdmissibleSubset { s: usize, rho_minus: f64 },
    #[error("epsilon nets are only built for dimension <= 3, got {0}")]
    DimensionUnsupported(usize),
    #[error("greedy target size {m} is smaller than s = {s}")]
    TargetTooSmall { m: usize, s: usize },
    #[error("no conditioned subset accepted after {0} draws")]
    Exhausted(usize),
    #[error("extraction failed in every one of {0} directions")]
    AllDirectionsFailed(usize),
    #[error("solver did not converge: kkt residual {:.3e} after {} sweeps", .0.kkt_residual, .0.sweeps)]
    NotConverged(Box<LassoFit>),
    #[error("support reduction failed: {0}")]
    ReductionFailed(String),
    #[error("sparsity {s} exceeds nu*n = {nu_n}")]
    SparsityTooLarge { s: usize, nu_n: f64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
