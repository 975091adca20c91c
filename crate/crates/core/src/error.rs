use thiserror::Error;

/// Errors raised by the regret engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("dimension mismatch for {field}: expected {expected}, found {found}")]
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("counting table is not non-decreasing: entry {lower:#b} is 1 but its superset {upper:#b} is 0")]
    NonMonotoneTable { lower: usize, upper: usize },

    #[error("mixture has no entries")]
    EmptyMixture,

    #[error("negative weight {value} at position {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("mixture weights sum to {sum}, expected 1")]
    MixtureNotNormalized { sum: f64 },

    #[error("rank {rank} outside 0..={max}")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("subset index {index} outside 1..={n}")]
    SubsetOutOfRange { index: usize, n: usize },

    #[error("mu0 = {mu0} lies outside the {branch} branch interval")]
    OutsideBranch { mu0: f64, branch: &'static str },

    #[error("dissimilarities must be sorted non-decreasing (position {index} decreases)")]
    UnsortedDissimilarities { index: usize },

    #[error(
        "exact evaluation infeasible: weighted threshold state count exceeded {limit} \
         (n = {n}); use the quantized evaluation mode"
    )]
    ExactEvaluationInfeasible { n: usize, limit: usize },

    #[error("quantized evaluation too coarse: bracket width {width:e} exceeds {limit:e}")]
    QuantizationTooCoarse { width: f64, limit: f64 },

    #[error("target {target} not reached by n_max = {n_max} although the limit says it is feasible")]
    TargetNotReached { target: f64, n_max: usize },

    #[error("enumeration budget exceeded: {required} outcomes > {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("linear program failed: {0}")]
    LinearProgram(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
