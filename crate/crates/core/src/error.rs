use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid axis {index}: {reason}")]
    InvalidAxis { index: usize, reason: String },

    #[error("a product grid needs at least one axis")]
    EmptyGrid,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("empty set has no distance field")]
    EmptyMask,

    #[error("empty value at domain point {point:?}: {context}")]
    EmptyValue { point: Vec<usize>, context: String },

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration budget exceeded: {estimate} profile-deviation pairs > budget {budget}")]
    BudgetExceeded { estimate: u128, budget: u128 },

    #[error("infeasible profile {0:?}")]
    Infeasible(Vec<usize>),

    #[error("target set is not contained in the feasible set; {count} offending points, first {first:?}")]
    TargetNotFeasible { count: usize, first: Vec<usize> },
}
