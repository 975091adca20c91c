//! Domain types shared by every other module: loss parameters, dissimilarity
//! profiles, policy descriptions, Bernoulli profiles and regret reports.
//!
//! All types are immutable once constructed and validate their inputs in the
//! constructor, so downstream code can rely on the invariants without
//! re-checking them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Newsvendor cost parameters under the normalization `c_o + c_u = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossParams<T> {
    c_o: T,
    c_u: T,
    q: T,
}

impl<T: Real> LossParams<T> {
    /// Builds the parameters from the critical quantile `q = c_u / (c_o + c_u)`.
    pub fn from_quantile(q: T) -> Result<Self> {
        if !(q > T::zero() && q < T::one()) {
            return Err(Error::invalid("q", format!("must lie in (0, 1), got {q}")));
        }
        Ok(Self {
            c_o: T::one() - q,
            c_u: q,
            q,
        })
    }

    /// Builds the parameters from raw unit costs, rescaling them so that they sum to one.
    pub fn from_costs(c_o: T, c_u: T) -> Result<Self> {
        if !(c_o > T::zero() && c_o.is_finite()) {
            return Err(Error::invalid("c_o", format!("must be positive, got {c_o}")));
        }
        if !(c_u > T::zero() && c_u.is_finite()) {
            return Err(Error::invalid("c_u", format!("must be positive, got {c_u}")));
        }
        Self::from_quantile(c_u / (c_o + c_u))
    }

    pub fn overage(&self) -> T {
        self.c_o
    }

    pub fn underage(&self) -> T {
        self.c_u
    }

    pub fn quantile(&self) -> T {
        self.q
    }

    /// `max(q, 1 - q)`, the largest unit cost.
    pub fn max_cost(&self) -> T {
        self.c_o.max(self.c_u)
    }

    /// Minimax regret achievable with support knowledge only, `q (1 - q)`.
    pub fn no_data_regret(&self) -> T {
        self.q * (T::one() - self.q)
    }

    /// Newsvendor loss `c_o (a - y)^+ + c_u (y - a)^+`.
    pub fn loss(&self, action: T, outcome: T) -> T {
        self.c_o * (action - outcome).max(T::zero()) + self.c_u * (outcome - action).max(T::zero())
    }
}

/// Shorthand for [`LossParams::from_quantile`].
pub fn make_loss<T: Real>(q: T) -> Result<LossParams<T>> {
    LossParams::from_quantile(q)
}

/// Distance used by [`DissimilarityProfile::from_contexts`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Manhattan,
}

/// The dissimilarities `d(x_0, x_i)`, `i = 1..n`, between the decision context
/// and each historical context.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissimilarityProfile<T> {
    d: Vec<T>,
}

impl<T: Real> DissimilarityProfile<T> {
    pub fn new(d: Vec<T>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::invalid(
                "dissimilarity",
                "profile must contain at least one sample",
            ));
        }
        if let Some((i, v)) = d.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= T::zero())) {
            return Err(Error::invalid(
                "dissimilarity",
                format!("entry {} must be finite and non-negative, got {v}", i + 1),
            ));
        }
        Ok(Self { d })
    }

    /// Every sample at the same dissimilarity `zeta`.
    pub fn constant(zeta: T, n: usize) -> Result<Self> {
        Self::new(vec![zeta; n])
    }

    /// Linear drift: sample `i` (1-based) sits at dissimilarity `i * delta`.
    pub fn drift(delta: T, n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| T::from_count(i) * delta).collect())
    }

    /// Dissimilarities computed from raw context vectors plus an additive
    /// offset accounting for unobserved factors.
    pub fn from_contexts(x0: &[T], contexts: &[Vec<T>], metric: Metric, offset: T) -> Result<Self> {
        if !(offset >= T::zero()) {
            return Err(Error::invalid("offset", format!("must be non-negative, got {offset}")));
        }
        let d = contexts
            .iter()
            .map(|x| {
                if x.len() != x0.len() {
                    return Err(Error::DimensionMismatch {
                        field: "context",
                        expected: x0.len(),
                        found: x.len(),
                    });
                }
                let diffs = x.iter().zip(x0).map(|(a, b)| *a - *b);
                let dist = match metric {
                    Metric::Euclidean => diffs.map(|v| v * v).sum::<T>().sqrt(),
                    Metric::Manhattan => diffs.map(|v| v.abs()).sum::<T>(),
                };
                Ok(dist + offset)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(d)
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.d
    }

    pub fn mean(&self) -> T {
        self.d.iter().copied().sum::<T>() / T::from_count(self.d.len())
    }

    pub fn max(&self) -> T {
        self.d.iter().copied().fold(T::zero(), T::max)
    }

    /// Position (0-based) of the first entry smaller than its predecessor.
    pub fn first_decrease(&self) -> Option<usize> {
        self.d.windows(2).position(|w| w[1] < w[0]).map(|i| i + 1)
    }

    pub fn is_sorted(&self) -> bool {
        self.first_decrease().is_none()
    }

    /// The `k` first entries.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.d.len() {
            return Err(Error::invalid(
                "k",
                format!("must lie in 1..={}, got {k}", self.d.len()),
            ));
        }
        Ok(Self {
            d: self.d[..k].to_vec(),
        })
    }
}

/// One component of a randomized mixture of order statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureEntry<T> {
    /// 0-based sample indices of the subset.
    pub subset: Vec<usize>,
    pub rank: usize,
    pub weight: T,
}

/// Description of a data-driven policy.
///
/// Subsets are stored as 0-based sample indices. A rank of 0 always orders 0
/// and a rank above the subset size always orders 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PolicySpec<T> {
    /// Minimizes `sum_i w_i * loss(a, y_i)`, ties resolved toward the smallest action.
    WeightedErm { weights: Vec<T> },
    /// The `rank`-th smallest outcome among the samples in `subset`.
    OrderStatistic { subset: Vec<usize>, rank: usize },
    /// Draws `(subset, rank)` with probability `weight`.
    MixtureOs { entries: Vec<MixtureEntry<T>> },
    /// Counting function given as `2^n` bits; bit `i` of the table index is
    /// the indicator `1{y_(i+1) <= z}`.
    TabulatedCounting { n: usize, table: Vec<bool> },
}

/// Largest `n` accepted by [`PolicySpec::TabulatedCounting`].
pub const MAX_TABULATED_N: usize = 20;

/// Tolerance on the total weight of a mixture.
pub const MIXTURE_SUM_TOL: f64 = 1e-12;

impl<T: Real> PolicySpec<T> {
    /// Equal-weight ERM on `n` samples.
    pub fn erm(n: usize) -> Self {
        PolicySpec::WeightedErm {
            weights: vec![T::one(); n],
        }
    }

    /// Exponential weights `w_i = gamma^i`.
    pub fn exponential(gamma: T, n: usize) -> Self {
        PolicySpec::WeightedErm {
            weights: (1..=n).map(|i| gamma.powi(i as i32)).collect(),
        }
    }

    /// Unit weight on the `k` first samples, zero elsewhere.
    pub fn nearest_neighbors(k: usize, n: usize) -> Self {
        PolicySpec::WeightedErm {
            weights: (0..n).map(|i| if i < k { T::one() } else { T::zero() }).collect(),
        }
    }

    /// Order statistic over the `k` first samples.
    pub fn prefix_order_statistic(k: usize, rank: usize) -> Self {
        PolicySpec::OrderStatistic {
            subset: (0..k).collect(),
            rank,
        }
    }

    /// Always orders 0.
    pub fn constant_zero() -> Self {
        PolicySpec::OrderStatistic {
            subset: Vec::new(),
            rank: 0,
        }
    }

    /// Always orders 1.
    pub fn constant_one() -> Self {
        PolicySpec::OrderStatistic {
            subset: Vec::new(),
            rank: 1,
        }
    }

    /// Mixture over the ranks `0..=k+1` of the order statistics of the `k` first samples.
    pub fn prefix_mixture(k: usize, lambdas: &[T]) -> Self {
        PolicySpec::MixtureOs {
            entries: lambdas
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > T::zero())
                .map(|(rank, w)| MixtureEntry {
                    subset: (0..k).collect(),
                    rank,
                    weight: *w,
                })
                .collect(),
        }
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        match self {
            PolicySpec::WeightedErm { weights } => {
                let first = weights.first().copied().unwrap_or_else(T::zero);
                if weights.iter().all(|w| *w == first) {
                    format!("erm(n={})", weights.len())
                } else {
                    format!("werm(n={})", weights.len())
                }
            }
            PolicySpec::OrderStatistic { subset, rank } => format!("os(|S|={},r={rank})", subset.len()),
            PolicySpec::MixtureOs { entries } => format!("mix({} entries)", entries.len()),
            PolicySpec::TabulatedCounting { n, .. } => format!("table(n={n})"),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        match self {
            PolicySpec::WeightedErm { weights } => {
                if weights.len() != n {
                    return Err(Error::DimensionMismatch {
                        field: "weights",
                        expected: n,
                        found: weights.len(),
                    });
                }
                validate_weights(weights)
            }
            PolicySpec::OrderStatistic { subset, rank } => validate_order_statistic(subset, *rank, n),
            PolicySpec::MixtureOs { entries } => {
                if entries.is_empty() {
                    return Err(Error::EmptyMixture);
                }
                let mut total = T::zero();
                for (i, e) in entries.iter().enumerate() {
                    if !(e.weight >= T::zero()) || !e.weight.is_finite() {
                        return Err(Error::NegativeWeight {
                            index: i,
                            value: e.weight.as_f64(),
                        });
                    }
                    validate_order_statistic(&e.subset, e.rank, n)?;
                    total = total + e.weight;
                }
                if (total - T::one()).abs() > T::lit(MIXTURE_SUM_TOL).max(T::epsilon() * T::lit(8.0)) {
                    return Err(Error::MixtureNotNormalized { sum: total.as_f64() });
                }
                Ok(())
            }
            PolicySpec::TabulatedCounting { n: table_n, table } => {
                if *table_n != n {
                    return Err(Error::DimensionMismatch {
                        field: "table dimension",
                        expected: n,
                        found: *table_n,
                    });
                }
                if n > MAX_TABULATED_N {
                    return Err(Error::invalid(
                        "table",
                        format!("tabulated counting functions are limited to n <= {MAX_TABULATED_N}"),
                    ));
                }
                if table.len() != 1 << n {
                    return Err(Error::DimensionMismatch {
                        field: "table",
                        expected: 1 << n,
                        found: table.len(),
                    });
                }
                check_monotone(table, n)
            }
        }
    }
}

fn validate_weights<T: Real>(weights: &[T]) -> Result<()> {
    for (i, w) in weights.iter().enumerate() {
        if !(*w >= T::zero()) || !w.is_finite() {
            return Err(Error::NegativeWeight {
                index: i,
                value: w.as_f64(),
            });
        }
    }
    if weights.iter().all(|w| *w == T::zero()) {
        return Err(Error::invalid("weights", "must not all be zero"));
    }
    Ok(())
}

fn validate_order_statistic(subset: &[usize], rank: usize, n: usize) -> Result<()> {
    if let Some(&bad) = subset.iter().find(|&&i| i >= n) {
        return Err(Error::SubsetOutOfRange { index: bad + 1, n });
    }
    if subset.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("subset", "indices must be strictly increasing"));
    }
    if rank > subset.len() + 1 {
        return Err(Error::RankOutOfRange {
            rank,
            max: subset.len() + 1,
        });
    }
    Ok(())
}

/// Checks that flipping any indicator from 0 to 1 never switches the table from 1 to 0.
fn check_monotone(table: &[bool], n: usize) -> Result<()> {
    for mask in 0..table.len() {
        if !table[mask] {
            continue;
        }
        for bit in 0..n {
            let upper = mask | (1 << bit);
            if upper != mask && !table[upper] {
                return Err(Error::NonMonotoneTable { lower: mask, upper });
            }
        }
    }
    Ok(())
}

/// A policy specification validated against a sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<T> {
    spec: PolicySpec<T>,
    n: usize,
}

impl<T: Real> Policy<T> {
    pub fn new(spec: PolicySpec<T>, n: usize) -> Result<Self> {
        spec.validate(n)?;
        Ok(Self { spec, n })
    }

    pub fn spec(&self) -> &PolicySpec<T> {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Validates `spec` for `n` samples.
pub fn validate_policy<T: Real>(spec: PolicySpec<T>, n: usize) -> Result<Policy<T>> {
    Policy::new(spec, n)
}

/// Means of the out-of-sample and historical Bernoulli distributions, clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernoulliProfile<T> {
    mu0: T,
    mus: Vec<T>,
}

impl<T: Real> BernoulliProfile<T> {
    pub fn new(mu0: T, mus: Vec<T>) -> Self {
        let clamp = |x: T| x.max(T::zero()).min(T::one());
        Self {
            mu0: clamp(mu0),
            mus: mus.into_iter().map(clamp).collect(),
        }
    }

    /// Historical means pushed as far from `mu0` as the dissimilarities allow,
    /// in the direction that hurts the policy on the given branch.
    pub fn extreme(branch: Branch, mu0: T, d: &DissimilarityProfile<T>) -> Self {
        let mus = d
            .values()
            .iter()
            .map(|&di| match branch {
                Branch::Up => mu0 + di,
                Branch::Down => mu0 - di,
            })
            .collect();
        Self::new(mu0, mus)
    }

    pub fn mu0(&self) -> T {
        self.mu0
    }

    pub fn mus(&self) -> &[T] {
        &self.mus
    }
}

/// Which half of the out-of-sample mean range a worst case lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `mu0` in `[0, 1 - q]`: ordering nothing is optimal and history is inflated.
    Up,
    /// `mu0` in `[1 - q, 1]`: history is deflated.
    Down,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Up => "up",
            Branch::Down => "down",
        }
    }

    /// Closed interval of out-of-sample means covered by this branch.
    pub fn interval<T: Real>(self, q: T) -> (T, T) {
        match self {
            Branch::Up => (T::zero(), T::one() - q),
            Branch::Down => (T::one() - q, T::one()),
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Result of a worst-case regret computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport<T> {
    /// Largest regret found; a lower bound on the supremum.
    pub value: T,
    /// Out-of-sample mean attaining `value`.
    pub mu0_star: T,
    pub branch: Branch,
    /// Number of objective evaluations on the initial grids (both branches).
    pub grid_points: usize,
    /// Half-width of the final bracket around `mu0_star`.
    pub tolerance: T,
    /// Upper bound on the gap between `value` and the supremum implied by the
    /// slope bound and the grid spacing.
    pub gap_bound: T,
    /// Bound on `|d regret / d mu0|` used for `gap_bound`.
    pub slope_bound: T,
    /// Width of the regret bracket at `mu0_star` (non-zero only for quantized evaluation).
    pub value_uncertainty: T,
    /// The maximizer sits within one grid cell of its branch's endpoint.
    pub near_endpoint: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_loss_examples() {
        let l = make_loss(0.9f64).unwrap();
        assert!((l.overage() - 0.1).abs() < 1e-15);
        assert_eq!(l.underage(), 0.9);
        assert_eq!(l.quantile(), 0.9);
        let l = make_loss(0.5f64).unwrap();
        assert_eq!((l.overage(), l.underage()), (0.5, 0.5));
        let err = make_loss(0.0f64).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { field: "q", .. }));
        assert!(make_loss(1.0f64).is_err());
        assert!(make_loss(f64::NAN).is_err());
    }

    #[test]
    fn from_costs_normalizes() {
        let l = LossParams::from_costs(1.0f64, 9.0).unwrap();
        assert!((l.quantile() - 0.9).abs() < 1e-15);
        assert!((l.overage() + l.underage() - 1.0).abs() < 1e-15);
        assert!(LossParams::from_costs(0.0f64, 1.0).is_err());
    }

    #[test]
    fn profile_constructors() {
        let c = DissimilarityProfile::constant(0.02f64, 4).unwrap();
        assert_eq!(c.values(), &[0.02; 4]);
        let d = DissimilarityProfile::drift(0.0025f64, 100).unwrap();
        for (i, v) in d.values().iter().enumerate() {
            assert_eq!(*v, (i + 1) as f64 * 0.0025);
        }
        assert!(d.is_sorted());
        assert!(DissimilarityProfile::<f64>::new(vec![]).is_err());
        assert!(DissimilarityProfile::new(vec![0.1f64, -0.1]).is_err());
        let u = DissimilarityProfile::new(vec![0.2f64, 0.1]).unwrap();
        assert_eq!(u.first_decrease(), Some(1));
    }

    #[test]
    fn contexts_to_profile() {
        let x0 = vec![0.0f64, 0.0];
        let xs = vec![vec![3.0, 4.0], vec![1.0, -1.0]];
        let e = DissimilarityProfile::from_contexts(&x0, &xs, Metric::Euclidean, 0.5).unwrap();
        assert_eq!(e.values()[0], 5.5);
        assert!((e.values()[1] - (2f64.sqrt() + 0.5)).abs() < 1e-15);
        let m = DissimilarityProfile::from_contexts(&x0, &xs, Metric::Manhattan, 0.0).unwrap();
        assert_eq!(m.values(), &[7.0, 2.0]);
        let bad = DissimilarityProfile::from_contexts(&x0, &[vec![1.0]], Metric::Manhattan, 0.0);
        assert!(matches!(bad, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn validate_policy_examples() {
        assert!(validate_policy(
            PolicySpec::WeightedErm {
                weights: vec![1.0f64; 3]
            },
            3
        )
        .is_ok());
        let err = validate_policy(
            PolicySpec::<f64>::OrderStatistic {
                subset: vec![0, 1],
                rank: 5,
            },
            3,
        )
        .unwrap_err();
        assert_eq!(err, Error::RankOutOfRange { rank: 5, max: 3 });
        // kappa(1,0) = 1 but kappa(1,1) = 0; index bit 0 is the first sample.
        let table = vec![false, true, false, false];
        let err = validate_policy(PolicySpec::<f64>::TabulatedCounting { n: 2, table }, 2).unwrap_err();
        assert_eq!(
            err,
            Error::NonMonotoneTable {
                lower: 0b01,
                upper: 0b11
            }
        );
    }

    #[test]
    fn validate_policy_errors() {
        let wrong_len = validate_policy(
            PolicySpec::WeightedErm {
                weights: vec![1.0f64; 2],
            },
            3,
        );
        assert!(matches!(wrong_len, Err(Error::DimensionMismatch { .. })));
        let zero = validate_policy(
            PolicySpec::WeightedErm {
                weights: vec![0.0f64; 2],
            },
            2,
        );
        assert!(matches!(zero, Err(Error::InvalidParameter { field: "weights", .. })));
        let neg = validate_policy(
            PolicySpec::WeightedErm {
                weights: vec![1.0f64, -1.0],
            },
            2,
        );
        assert!(matches!(neg, Err(Error::NegativeWeight { index: 1, .. })));
        let empty = validate_policy(PolicySpec::<f64>::MixtureOs { entries: vec![] }, 2);
        assert_eq!(empty.unwrap_err(), Error::EmptyMixture);
        let unnormalized = validate_policy(
            PolicySpec::MixtureOs {
                entries: vec![MixtureEntry {
                    subset: vec![0],
                    rank: 1,
                    weight: 0.5f64,
                }],
            },
            1,
        );
        assert!(matches!(unnormalized, Err(Error::MixtureNotNormalized { .. })));
        let out_of_range = validate_policy(
            PolicySpec::<f64>::OrderStatistic {
                subset: vec![3],
                rank: 1,
            },
            3,
        );
        assert_eq!(out_of_range.unwrap_err(), Error::SubsetOutOfRange { index: 4, n: 3 });
        let too_big = validate_policy(
            PolicySpec::<f64>::TabulatedCounting {
                n: 21,
                table: Vec::new(),
            },
            21,
        );
        assert!(too_big.is_err());
    }

    #[test]
    fn bernoulli_profile_clamps() {
        let p = BernoulliProfile::new(1.2f64, vec![-0.1, 0.5, 3.0]);
        assert_eq!(p.mu0(), 1.0);
        assert_eq!(p.mus(), &[0.0, 0.5, 1.0]);
        let d = DissimilarityProfile::new(vec![0.1f64, 0.7]).unwrap();
        let up = BernoulliProfile::extreme(Branch::Up, 0.5, &d);
        assert_eq!(up.mus(), &[0.6, 1.0]);
        let down = BernoulliProfile::extreme(Branch::Down, 0.5, &d);
        assert_eq!(down.mus()[1], 0.0);
    }

    #[test]
    fn loss_is_newsvendor() {
        let l = make_loss(0.9f64).unwrap();
        assert!((l.loss(0.0, 1.0) - 0.9).abs() < 1e-15);
        assert!((l.loss(1.0, 0.0) - 0.1).abs() < 1e-15);
        assert_eq!(l.loss(0.3, 0.3), 0.0);
    }
}
