use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinfaError {
    #[error("invalid observation pattern: {0}")]
    InvalidPattern(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("index {index} out of range for {d} variables")]
    IndexOutOfRange { index: usize, d: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not numerically positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error(
        "block {block} (variables {first}..={last}, 1-based) pools {pooled_n} samples, \
         not enough to identify {q} factors"
    )]
    DegenerateBlock {
        block: usize,
        first: usize,
        last: usize,
        pooled_n: usize,
        q: usize,
    },

    #[error("non-positive diagonal entry at position {0}")]
    NonPositiveDiagonal(usize),

    #[error("cross-validation fold {fold} has no rows for dataset {dataset}")]
    EmptyFold { fold: usize, dataset: usize },

    #[error("every bootstrap replicate failed")]
    AllReplicatesFailed,

    #[error("empty selection: {0}")]
    EmptySelection(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("missingness target {target} is not reachable with d={d}, K={k} (closest {closest})")]
    InfeasibleEta {
        target: f64,
        d: usize,
        k: usize,
        closest: f64,
    },
}

pub type Result<T> = std::result::Result<T, LinfaError>;
