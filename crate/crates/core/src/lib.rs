//! Exact worst-case regret of weighted empirical-risk-minimization policies
//! for the contextual newsvendor problem.
//!
//! Samples `y_1..y_n` come from distributions within Kolmogorov distance
//! `d_i` of the out-of-sample distribution. For every policy whose action
//! depends on the samples only through threshold counts (ERM, weighted ERM,
//! k-NN, order statistics and their mixtures), the worst case over all such
//! distributions is computed exactly by a one-dimensional search.
//!
//! The numerical core is generic over [`Real`]; the aliases below fix it to `f64`.

// `!(x >= 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod model;
pub mod oracle;
pub mod policies;
pub mod regret;
pub mod scalar;
pub mod tuning;

pub use error::{Error, Result};
pub use model::{make_loss, validate_policy, Branch, Metric, MixtureEntry};
pub use policies::{WeightedMode, DEFAULT_RESOLUTION};
pub use regret::RegretOptions;
pub use scalar::Real;

pub type LossParams = model::LossParams<f64>;
pub type DissimilarityProfile = model::DissimilarityProfile<f64>;
pub type PolicySpec = model::PolicySpec<f64>;
pub type Policy = model::Policy<f64>;
pub type BernoulliProfile = model::BernoulliProfile<f64>;
pub type RegretReport = model::RegretReport<f64>;
pub type PPoint = policies::PPoint<f64>;
