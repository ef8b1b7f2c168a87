use thiserror::Error;

/// Errors raised by model fitting, contrast construction, the multivariate-t
/// engine and the closure machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("group {0} has no observations")]
    EmptyGroup(usize),

    #[error("no residual degrees of freedom: N = {n} with {params} mean parameters")]
    ZeroResidualDf { n: usize, params: usize },

    #[error("design matrix is rank deficient (group and block factors are confounded)")]
    RankDeficient,

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("subset of active treatments is empty")]
    EmptySubset,

    #[error("treatment index {index} out of range for {groups} groups")]
    IndexOutOfRange { index: usize, groups: usize },

    #[error("contrast row {0} has non-positive variance")]
    DegenerateContrast(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("correlation matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("invalid integration bounds: {0}")]
    InvalidBounds(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("too many groups for full closure: k = {0} exceeds 20")]
    TooManyGroups(usize),

    #[error("{0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
