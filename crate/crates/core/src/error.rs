use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("matrix is not acceptable: spectral radius of |Q| is {radius}")]
    NotAcceptable { radius: f64 },
    #[error("matrix is numerically singular (pivot {pivot:e})")]
    NumericallySingular { pivot: f64 },
    #[error("unknown site `{0}`")]
    UnknownSite(String),
    #[error("invalid state space: {0}")]
    InvalidSpace(String),
    #[error("1 + f vanishes at site {site}")]
    DivisionByZero { site: usize },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("random walk exceeded the cap of {cap} steps")]
    WalkCapExceeded { cap: u64 },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("input too large: {0}")]
    TooLarge(String),
    #[error("enumeration budget of {budget} items exceeded")]
    BudgetExceeded { budget: u64 },
    #[error("weights must be real and nonnegative to be sampled")]
    NotPositive,
    #[error("invalid gamma shape {0}")]
    InvalidShape(f64),
    #[error("power of a determinant ratio crosses the branch cut: {0}")]
    BranchCrossing(String),
    #[error("non-integer power of a nonpositive base at site {site}")]
    BranchError { site: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("outside the domain of the transform: {0}")]
    OutOfDomain(String),
    #[error("parse error: {0}")]
    Parse(String),
}
