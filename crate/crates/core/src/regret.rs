//! Worst-case expected regret.
//!
//! The worst case over all distributions satisfying the local condition is
//! attained by Bernoulli distributions whose historical means sit as far from
//! the out-of-sample mean `mu0` as allowed. What remains is a maximization over
//! `mu0` on two line segments ([`Branch::Up`] and [`Branch::Down`]), done here
//! by a dense grid seeded with the clamping breakpoints followed by a
//! golden-section refinement around the best grid point.

use crate::error::{Error, Result};
use crate::model::{BernoulliProfile, Branch, DissimilarityProfile, Policy, RegretReport};
use crate::policies::{PEvaluator, PPoint, TailBracket, WeightedMode};
use crate::scalar::Real;

/// Search settings for [`worst_case_regret`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretOptions {
    /// Uniform grid points per branch, endpoints included.
    pub grid: usize,
    /// Golden-section iterations around the best grid point.
    pub refine_iters: usize,
    pub mode: WeightedMode,
}

impl Default for RegretOptions {
    fn default() -> Self {
        Self {
            grid: 10001,
            refine_iters: 60,
            mode: WeightedMode::Exact,
        }
    }
}

/// `[1 - p] (z0 - q) + q (1 - z0) - min{(1 - q) z0, q (1 - z0)}` for a given `p = P(z)`.
pub fn psi_value<T: Real>(p: T, q: T, z0: T) -> T {
    let one = T::one();
    (one - p) * (z0 - q) + q * (one - z0) - ((one - q) * z0).min(q * (one - z0))
}

/// Regret integrand at out-of-sample CDF value `z0` and sample CDF values `z`.
pub fn psi<T: Real>(policy: &Policy<T>, q: T, z0: T, z: &PPoint<T>) -> Result<T> {
    if !(z0 >= T::zero() && z0 <= T::one()) {
        return Err(Error::invalid("z0", format!("must lie in [0, 1], got {z0}")));
    }
    let p = crate::policies::p_policy(policy, z, q)?;
    Ok(psi_value(p, q, z0))
}

/// Expected regret when the samples are Bernoulli(`mu_i`) and the new outcome Bernoulli(`mu0`).
pub fn expected_regret_bernoulli<T: Real>(policy: &Policy<T>, q: T, profile: &BernoulliProfile<T>) -> Result<T> {
    let z = PPoint::new(profile.mus().iter().map(|&m| T::one() - m).collect())?;
    psi(policy, q, T::one() - profile.mu0(), &z)
}

/// Full-information expected cost against Bernoulli(`mu`), `min{(1 - q)(1 - mu), q mu}`.
pub fn oracle_cost_bernoulli<T: Real>(q: T, mu: T) -> T {
    ((T::one() - q) * (T::one() - mu)).min(q * mu)
}

/// Regret of ERM with infinitely many samples at constant dissimilarity `zeta`.
///
/// The sample CDF mean becomes a step at `q`; at the step both sides are
/// admissible, which gives `max(min(zeta, 1 - q), min(zeta, q))`.
pub fn limiting_regret_erm<T: Real>(zeta: T, q: T) -> T {
    let z = zeta.max(T::zero());
    z.min(T::one() - q).max(z.min(q))
}

/// Regret as a function of `mu0` on one branch, with the worst history plugged in.
#[derive(Debug, Clone)]
pub struct BranchObjective<'a, T> {
    branch: Branch,
    q: T,
    d: &'a DissimilarityProfile<T>,
    eval: PEvaluator<T>,
}

impl<'a, T: Real> BranchObjective<'a, T> {
    pub fn new(
        branch: Branch,
        policy: &Policy<T>,
        q: T,
        d: &'a DissimilarityProfile<T>,
        mode: WeightedMode,
    ) -> Result<Self> {
        check_lengths(policy, d)?;
        Ok(Self {
            branch,
            q,
            d,
            eval: PEvaluator::new(policy, q, mode)?,
        })
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn interval(&self) -> (T, T) {
        self.branch.interval(self.q)
    }

    /// Sample CDF values below 1 under the worst history, `1 - m_i`.
    pub fn history(&self, mu0: T) -> Vec<T> {
        let one = T::one();
        self.d
            .values()
            .iter()
            .map(|&di| match self.branch {
                Branch::Up => one - (mu0 + di).min(one),
                Branch::Down => one - (mu0 - di).max(T::zero()),
            })
            .collect()
    }

    fn check(&self, mu0: T) -> Result<()> {
        let (a, b) = self.interval();
        let slack = T::threshold_tol();
        if !(mu0 >= a - slack && mu0 <= b + slack) {
            return Err(Error::OutsideBranch {
                mu0: mu0.as_f64(),
                branch: self.branch.name(),
            });
        }
        Ok(())
    }

    /// Regret bracket at `mu0`; degenerate unless weights are evaluated in quantized mode.
    pub fn bracket(&self, mu0: T) -> Result<TailBracket<T>> {
        self.check(mu0)?;
        let p = self.eval.eval(&self.history(mu0))?;
        let one = T::one();
        Ok(match self.branch {
            Branch::Up => {
                let f = (one - self.q - mu0).max(T::zero());
                TailBracket {
                    lower: (one - p.upper) * f,
                    upper: (one - p.lower) * f,
                }
            }
            Branch::Down => {
                let f = (mu0 - (one - self.q)).max(T::zero());
                TailBracket {
                    lower: p.lower * f,
                    upper: p.upper * f,
                }
            }
        })
    }

    pub fn value(&self, mu0: T) -> Result<T> {
        Ok(self.bracket(mu0)?.midpoint())
    }

    /// Points where the clamping of some `mu0 ± d_i` switches on.
    fn breakpoints(&self) -> Vec<T> {
        let (a, b) = self.interval();
        self.d
            .values()
            .iter()
            .map(|&di| match self.branch {
                Branch::Up => T::one() - di,
                Branch::Down => di,
            })
            .filter(|&x| x > a && x < b)
            .collect()
    }
}

fn check_lengths<T: Real>(policy: &Policy<T>, d: &DissimilarityProfile<T>) -> Result<()> {
    if policy.n() != d.len() {
        return Err(Error::DimensionMismatch {
            field: "dissimilarity",
            expected: policy.n(),
            found: d.len(),
        });
    }
    Ok(())
}

/// Regret on one branch at `mu0`.
pub fn branch_regret<T: Real>(obj: &BranchObjective<'_, T>, mu0: T) -> Result<T> {
    obj.value(mu0)
}

/// Bound on `|d regret / d mu0|`: each `h_i` moves at unit speed and `P` has
/// partial derivatives in `[0, 1]`, plus one for the linear factor.
pub fn slope_bound<T: Real>(n: usize) -> T {
    T::one() + T::from_count(n)
}

#[derive(Debug, Clone, Copy)]
struct BranchBest<T> {
    value: T,
    mu0: T,
    tolerance: T,
    max_cell: T,
    near_endpoint: bool,
    uncertainty: T,
    evaluations: usize,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn search_branch<T: Real>(obj: &BranchObjective<'_, T>, opts: &RegretOptions) -> Result<BranchBest<T>> {
    let (a, b) = obj.interval();
    let grid = opts.grid.max(2);
    let step = (b - a) / T::from_count(grid - 1);
    let mut points: Vec<T> = (0..grid).map(|i| a + step * T::from_count(i)).collect();
    points[grid - 1] = b;
    points.extend(obj.breakpoints());
    points.sort_by(|x, y| x.partial_cmp(y).expect("grid is finite"));
    points.dedup();

    let mut best = 0;
    let mut best_val = T::neg_infinity();
    for (i, &x) in points.iter().enumerate() {
        let v = obj.value(x)?;
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    let max_cell = points.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), T::max);
    let mut best_mu = points[best];
    let mut lo = points[best.saturating_sub(1)];
    let mut hi = points[(best + 1).min(points.len() - 1)];
    let evaluations = points.len();

    if opts.refine_iters > 0 && hi > lo {
        let r = T::lit(INV_PHI);
        let mut x1 = hi - r * (hi - lo);
        let mut x2 = lo + r * (hi - lo);
        let mut f1 = obj.value(x1)?;
        let mut f2 = obj.value(x2)?;
        for _ in 0..opts.refine_iters {
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - r * (hi - lo);
                f1 = obj.value(x1)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + r * (hi - lo);
                f2 = obj.value(x2)?;
            }
            for (x, f) in [(x1, f1), (x2, f2)] {
                if f > best_val {
                    best_val = f;
                    best_mu = x;
                }
            }
        }
    }
    let tolerance = (hi - lo) / T::lit(2.0);
    let near_endpoint = best_mu - a <= max_cell || b - best_mu <= max_cell;
    let uncertainty = obj.bracket(best_mu)?.width();
    Ok(BranchBest {
        value: best_val.max(T::zero()),
        mu0: best_mu,
        tolerance,
        max_cell,
        near_endpoint,
        uncertainty,
        evaluations,
    })
}

/// Worst-case expected regret of `policy` over all distributions within the
/// dissimilarities `d` of the out-of-sample distribution.
pub fn worst_case_regret<T: Real>(
    policy: &Policy<T>,
    q: T,
    d: &DissimilarityProfile<T>,
    opts: &RegretOptions,
) -> Result<RegretReport<T>> {
    check_lengths(policy, d)?;
    let up = search_branch(&BranchObjective::new(Branch::Up, policy, q, d, opts.mode)?, opts)?;
    let down = search_branch(&BranchObjective::new(Branch::Down, policy, q, d, opts.mode)?, opts)?;
    let (branch, best) = if up.value >= down.value {
        (Branch::Up, up)
    } else {
        (Branch::Down, down)
    };
    let slope = slope_bound::<T>(policy.n());
    Ok(RegretReport {
        value: best.value,
        mu0_star: best.mu0,
        branch,
        grid_points: up.evaluations + down.evaluations,
        tolerance: best.tolerance,
        gap_bound: slope * up.max_cell.max(down.max_cell) / T::lit(2.0),
        slope_bound: slope,
        value_uncertainty: best.uncertainty,
        near_endpoint: best.near_endpoint,
    })
}
