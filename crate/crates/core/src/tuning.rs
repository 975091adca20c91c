//! Policy selection: learning curves, sample complexity, minimax mixtures of
//! order statistics and the exponential-weight and nearest-neighbor families.
//!
//! Everything here works in `f64`.

mod lp;

use serde::Serialize;

use crate::bounds::universal_lower_bound;
use crate::error::{Error, Result};
use crate::model::{Branch, DissimilarityProfile, Policy, PolicySpec, RegretReport};
use crate::policies::{subset_tails, WeightedMode};
use crate::regret::{limiting_regret_erm, worst_case_regret, RegretOptions};

use lp::{Outcome, PackingLp};

/// Worst-case regret of `family(n)` against `profile(n)` for each `n`.
pub fn regret_curve<F, D>(
    family: F,
    q: f64,
    profile: D,
    ns: impl IntoIterator<Item = usize>,
    opts: &RegretOptions,
) -> Result<Vec<(usize, RegretReport<f64>)>>
where
    F: Fn(usize) -> PolicySpec<f64>,
    D: Fn(usize) -> Result<DissimilarityProfile<f64>>,
{
    let ns: Vec<usize> = ns.into_iter().collect();
    if ns.is_empty() {
        return Err(Error::invalid("n_range", "must not be empty"));
    }
    ns.into_iter()
        .map(|n| {
            let policy = Policy::new(family(n), n)?;
            Ok((n, worst_case_regret(&policy, q, &profile(n)?, opts)?))
        })
        .collect()
}

/// Default scan limit of [`sample_complexity`].
pub const DEFAULT_N_MAX: usize = 50_000;

/// Smallest `n` at which ERM with `n` samples at constant dissimilarity `zeta`
/// has worst-case regret at most `f q (1 - q)`, for each fraction `f`.
/// `None` marks targets below the infinite-sample regret.
pub fn sample_complexity(
    q: f64,
    zeta: f64,
    targets: &[f64],
    n_max: usize,
    opts: &RegretOptions,
) -> Result<Vec<(f64, Option<usize>)>> {
    if !(zeta >= 0.0) {
        return Err(Error::invalid("zeta", format!("must be non-negative, got {zeta}")));
    }
    let no_data = q * (1.0 - q);
    let mut cache: Vec<f64> = Vec::new();
    let mut value_at = |n: usize| -> Result<f64> {
        while cache.len() < n {
            let m = cache.len() + 1;
            let policy = Policy::new(PolicySpec::erm(m), m)?;
            let d = DissimilarityProfile::constant(zeta, m)?;
            cache.push(worst_case_regret(&policy, q, &d, opts)?.value);
        }
        Ok(cache[n - 1])
    };
    let mut out = Vec::with_capacity(targets.len());
    for &f in targets {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::invalid("target", format!("must lie in (0, 1], got {f}")));
        }
        let goal = f * no_data;
        if limiting_regret_erm(zeta, q) > goal {
            out.push((f, None));
            continue;
        }
        let mut found = None;
        for n in 1..=n_max {
            if value_at(n)? <= goal {
                found = Some(n);
                break;
            }
        }
        match found {
            Some(n) => out.push((f, Some(n))),
            None => return Err(Error::TargetNotReached { target: f, n_max }),
        }
    }
    Ok(out)
}

/// Settings of the minimax mixture solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureOptions {
    /// Grid points per branch for the discretized game.
    pub mu0_grid: usize,
    /// Required gap between the primal and dual game values.
    pub certificate_tol: f64,
    /// Search used to re-evaluate the tuned mixture.
    pub validation: RegretOptions,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        Self {
            mu0_grid: 2001,
            certificate_tol: 1e-8,
            validation: RegretOptions::default(),
        }
    }
}

/// A tuned mixture over the order statistics of the `k` most relevant samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureSolution {
    pub k: usize,
    /// Probability of each rank `0..=k+1`.
    pub lambdas: Vec<f64>,
    /// Worst-case regret of the mixture from the full search.
    pub value: f64,
    /// Minimax value of the discretized game.
    pub grid_value: f64,
    /// Primal value minus dual value of the discretized game.
    pub certificate: f64,
    pub mu0_star: f64,
    pub branch: Branch,
}

impl MixtureSolution {
    /// The mixture as a policy on `n >= k` samples.
    pub fn policy_spec(&self) -> PolicySpec<f64> {
        PolicySpec::prefix_mixture(self.k, &self.lambdas)
    }
}

/// Discretized game: rows are `mu0` points (both branches), columns are ranks `0..=k+1`.
struct Payoff {
    rows: Vec<Vec<f64>>,
}

fn grid_points(a: f64, b: f64, count: usize, extra: impl Iterator<Item = f64>) -> Vec<f64> {
    let count = count.max(2);
    let step = (b - a) / (count - 1) as f64;
    let mut pts: Vec<f64> = (0..count).map(|i| a + step * i as f64).collect();
    pts[count - 1] = b;
    pts.extend(extra.filter(|&x| x > a && x < b));
    pts.sort_by(|x, y| x.partial_cmp(y).expect("finite grid"));
    pts.dedup();
    pts
}

fn payoff(k: usize, q: f64, d: &[f64], grid: usize) -> Payoff {
    let subset: Vec<usize> = (0..k).collect();
    let mut rows = Vec::new();
    for branch in [Branch::Up, Branch::Down] {
        let (a, b) = branch.interval(q);
        let kinks = d.iter().map(|&di| match branch {
            Branch::Up => 1.0 - di,
            Branch::Down => di,
        });
        for mu0 in grid_points(a, b, grid, kinks) {
            let h: Vec<f64> = d
                .iter()
                .map(|&di| match branch {
                    Branch::Up => 1.0 - (mu0 + di).min(1.0),
                    Branch::Down => 1.0 - (mu0 - di).max(0.0),
                })
                .collect();
            let tails = subset_tails(&subset, &h);
            let row: Vec<f64> = match branch {
                Branch::Up => {
                    let f = (1.0 - q - mu0).max(0.0);
                    tails.iter().map(|t| (1.0 - t) * f).collect()
                }
                Branch::Down => {
                    let f = (mu0 - (1.0 - q)).max(0.0);
                    tails.iter().map(|t| t * f).collect()
                }
            };
            if row.iter().any(|&v| v > 0.0) {
                rows.push(row);
            }
        }
    }
    Payoff { rows }
}

fn row_payoffs(rows: &[Vec<f64>], lambda: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|r| r.iter().zip(lambda).map(|(g, l)| g * l).sum())
        .collect()
}

/// Minimax strategy of the column player, its value and the duality gap.
fn solve_game(g: &Payoff, tol: f64) -> Result<(Vec<f64>, f64, f64)> {
    let ncols = g.rows[0].len();
    // A column that never pays anything is a pure optimal strategy.
    for c in 0..ncols {
        if g.rows.iter().all(|r| r[c] <= 0.0) {
            let mut lambda = vec![0.0; ncols];
            lambda[c] = 1.0;
            return Ok((lambda, 0.0, 0.0));
        }
    }
    let mut lp = PackingLp::new(ncols);
    let mut active: Vec<usize> = Vec::new();
    let seed = |idx: usize, active: &mut Vec<usize>| {
        if !active.contains(&idx) {
            active.push(idx);
        }
    };
    for c in 0..ncols {
        let best = (0..g.rows.len())
            .max_by(|&a, &b| g.rows[a][c].partial_cmp(&g.rows[b][c]).expect("finite payoff"))
            .expect("non-empty payoff");
        seed(best, &mut active);
    }
    for i in (0..g.rows.len()).step_by(50) {
        seed(i, &mut active);
    }
    for &i in &active {
        lp.add_row(&g.rows[i]);
    }
    let max_rounds = 10 * g.rows.len() + 100;
    let mut rebuilt = false;
    for _ in 0..max_rounds {
        let outcome = match lp.solve() {
            Ok(o) => o,
            Err(_) => {
                // Round-off built up over many row additions: start over on the active rows.
                lp = PackingLp::new(ncols);
                for &i in &active {
                    lp.add_row(&g.rows[i]);
                }
                lp.solve()?
            }
        };
        match outcome {
            Outcome::Optimal => {}
            Outcome::Unbounded(c) => {
                // Add the row where the offending column pays most.
                let best = (0..g.rows.len())
                    .filter(|i| !active.contains(i))
                    .max_by(|&a, &b| g.rows[a][c].partial_cmp(&g.rows[b][c]).expect("finite payoff"))
                    .ok_or_else(|| Error::LinearProgram("unbounded game program".into()))?;
                active.push(best);
                lp.add_row(&g.rows[best]);
                continue;
            }
        }
        let x = lp.primal_solution();
        let sx: f64 = x.iter().sum();
        if !(sx > 0.0) {
            return Err(Error::LinearProgram("degenerate game solution".into()));
        }
        let lambda: Vec<f64> = x.iter().map(|v| v / sx).collect();
        let pay = row_payoffs(&g.rows, &lambda);
        let upper = pay.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Dual strategy over the active rows gives a lower bound on the game value.
        let y = lp.dual_solution();
        let sy: f64 = y.iter().sum();
        let lower = if sy > 0.0 {
            (0..ncols)
                .map(|c| active.iter().zip(&y).map(|(&i, &yi)| yi * g.rows[i][c]).sum::<f64>() / sy)
                .fold(f64::INFINITY, f64::min)
        } else {
            0.0
        };
        let gap = (upper - lower).max(0.0);
        if gap <= tol {
            return Ok((lambda, upper, gap));
        }
        let level = 1.0 / sx;
        let mut violated: Vec<usize> = (0..pay.len())
            .filter(|&i| pay[i] > level + 1e-13 && !active.contains(&i))
            .collect();
        if violated.is_empty() {
            // The tableau claims optimality on the active rows but the dual
            // disagrees: round-off. Rebuild once from the active rows.
            if rebuilt {
                return Err(Error::LinearProgram(format!("duality gap {gap:e} did not close")));
            }
            rebuilt = true;
            lp = PackingLp::new(ncols);
            for &i in &active {
                lp.add_row(&g.rows[i]);
            }
            continue;
        }
        rebuilt = false;
        violated.sort_by(|&a, &b| pay[b].partial_cmp(&pay[a]).expect("finite payoff"));
        let mut added: Vec<usize> = Vec::new();
        for i in violated {
            if added.len() >= 16 {
                break;
            }
            if added.iter().all(|&j| i.abs_diff(j) > 2) {
                added.push(i);
            }
        }
        for i in added {
            active.push(i);
            lp.add_row(&g.rows[i]);
        }
    }
    Err(Error::LinearProgram("row generation did not converge".into()))
}

fn check_sorted(d: &DissimilarityProfile<f64>) -> Result<()> {
    match d.first_decrease() {
        Some(i) => Err(Error::UnsortedDissimilarities { index: i + 1 }),
        None => Ok(()),
    }
}

/// Minimax mixture over the ranks `0..=k+1` of the `k` first samples of `d`.
pub fn tune_mixture_fixed_k(
    k: usize,
    q: f64,
    d: &DissimilarityProfile<f64>,
    opts: &MixtureOptions,
) -> Result<MixtureSolution> {
    check_sorted(d)?;
    if k == 0 || k > d.len() {
        return Err(Error::invalid("k", format!("must lie in 1..={}, got {k}", d.len())));
    }
    let dk = &d.values()[..k];
    let g = payoff(k, q, dk, opts.mu0_grid);
    let (lambda, grid_value, certificate) = solve_game(&g, opts.certificate_tol)?;
    let lambdas = clean_simplex(lambda);
    let prefix = d.prefix(k)?;
    let policy = Policy::new(PolicySpec::prefix_mixture(k, &lambdas), k)?;
    let report = worst_case_regret(&policy, q, &prefix, &opts.validation)?;
    Ok(MixtureSolution {
        k,
        lambdas,
        value: report.value.max(grid_value),
        grid_value,
        certificate,
        mu0_star: report.mu0_star,
        branch: report.branch,
    })
}

/// Drops round-off negatives and renormalizes to sum exactly one.
fn clean_simplex(lambda: Vec<f64>) -> Vec<f64> {
    let clipped: Vec<f64> = lambda.into_iter().map(|v| if v < 1e-15 { 0.0 } else { v }).collect();
    let s: f64 = clipped.iter().sum();
    clipped.into_iter().map(|v| v / s).collect()
}

/// Settings of [`tune_kstar_erm_dagger`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KStarOptions {
    pub mixture: MixtureOptions,
    /// Grid values within this relative margin of the best are ties, resolved
    /// toward smaller `k`. Grid values are compared because they are
    /// non-increasing in `k` up to solver precision; validated values carry
    /// refinement noise of about `1e-6` relative.
    pub tie_tol: f64,
}

impl Default for KStarOptions {
    fn default() -> Self {
        Self {
            mixture: MixtureOptions::default(),
            tie_tol: DEFAULT_TIE_TOL,
        }
    }
}

/// Default relative tie margin for the effective sample size.
pub const DEFAULT_TIE_TOL: f64 = 1e-5;

/// Tuned mixture for every `k` scanned, plus the selected one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KStarScan {
    pub best: MixtureSolution,
    /// `(k, value, grid_value)` for each `k` solved.
    pub curve: Vec<(usize, f64, f64)>,
}

/// Scans `k = 1..=n`. With constant dissimilarities the scan stops at the
/// first `k` within the tie margin of the universal lower bound, since no
/// larger `k` can improve on it by more than the margin.
pub fn kstar_scan(n: usize, q: f64, d: &DissimilarityProfile<f64>, opts: &KStarOptions) -> Result<KStarScan> {
    check_sorted(d)?;
    if n == 0 || n > d.len() {
        return Err(Error::invalid("n", format!("must lie in 1..={}, got {n}", d.len())));
    }
    let vals = &d.values()[..n];
    let floor = if vals.iter().all(|&v| v == vals[0]) {
        Some(universal_lower_bound(vals[0]))
    } else {
        None
    };
    let mut solutions: Vec<MixtureSolution> = Vec::new();
    for k in 1..=n {
        let sol = tune_mixture_fixed_k(k, q, d, &opts.mixture)?;
        let done = floor.is_some_and(|lb| sol.grid_value <= lb * (1.0 + opts.tie_tol));
        solutions.push(sol);
        if done {
            break;
        }
    }
    let min = solutions.iter().map(|s| s.grid_value).fold(f64::INFINITY, f64::min);
    let best = solutions
        .iter()
        .find(|s| s.grid_value <= min * (1.0 + opts.tie_tol))
        .expect("at least one k")
        .clone();
    let curve = solutions.iter().map(|s| (s.k, s.value, s.grid_value)).collect();
    Ok(KStarScan { best, curve })
}

/// Best mixture over `k = 1..=n`; its `k` is the effective sample size.
pub fn tune_kstar_erm_dagger(
    n: usize,
    q: f64,
    d: &DissimilarityProfile<f64>,
    opts: &KStarOptions,
) -> Result<MixtureSolution> {
    Ok(kstar_scan(n, q, d, opts)?.best)
}

/// Quantization used by [`EwermOptions::default`]. Coarser than
/// [`crate::policies::DEFAULT_RESOLUTION`]: `gamma` close to 1 makes each evaluation cost
/// `n * resolution`, and the regret uncertainty stays near `1e-5`.
pub const EWERM_RESOLUTION: f64 = 1e5;

/// Settings of [`tune_ewerm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwermOptions {
    pub gamma_step: f64,
    pub regret: RegretOptions,
    /// Largest tolerated regret uncertainty from quantized evaluation.
    pub max_uncertainty: f64,
}

impl Default for EwermOptions {
    fn default() -> Self {
        Self {
            gamma_step: 0.01,
            regret: RegretOptions {
                grid: 401,
                refine_iters: 40,
                mode: WeightedMode::Quantized {
                    resolution: EWERM_RESOLUTION,
                },
            },
            max_uncertainty: 5e-4,
        }
    }
}

/// One point of a tuning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuningPoint {
    pub param: f64,
    pub value: f64,
    pub uncertainty: f64,
}

/// Selected parameter and the full curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningResult {
    pub param: f64,
    pub value: f64,
    pub curve: Vec<TuningPoint>,
}

fn argmin(curve: &[TuningPoint]) -> (f64, f64) {
    let best = curve
        .iter()
        .fold(None::<&TuningPoint>, |acc, p| match acc {
            Some(b) if b.value <= p.value => Some(b),
            _ => Some(p),
        })
        .expect("non-empty curve");
    (best.param, best.value)
}

/// Exponential weights `gamma^i`, with `gamma = 0` read as its limit (all weight on the first sample).
pub fn exponential_spec(gamma: f64, n: usize) -> PolicySpec<f64> {
    if gamma <= 0.0 {
        PolicySpec::nearest_neighbors(1, n)
    } else {
        PolicySpec::exponential(gamma, n)
    }
}

/// Exponential-weight ERM under linear drift `d_i = i delta`, over a grid of `gamma` in `[0, 1]`.
pub fn tune_ewerm(n: usize, q: f64, delta: f64, opts: &EwermOptions) -> Result<TuningResult> {
    if !(opts.gamma_step > 0.0 && opts.gamma_step <= 1.0) {
        return Err(Error::invalid("gamma_step", "must lie in (0, 1]"));
    }
    let steps = (1.0 / opts.gamma_step).round() as usize;
    let gammas: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
    tune_ewerm_over(n, q, delta, &gammas, opts)
}

/// [`tune_ewerm`] over an explicit list of `gamma` values.
pub fn tune_ewerm_over(n: usize, q: f64, delta: f64, gammas: &[f64], opts: &EwermOptions) -> Result<TuningResult> {
    let d = DissimilarityProfile::drift(delta, n)?;
    let mut curve = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::invalid("gamma", format!("must lie in [0, 1], got {gamma}")));
        }
        let policy = Policy::new(exponential_spec(gamma, n), n)?;
        let r = worst_case_regret(&policy, q, &d, &opts.regret)?;
        if r.value_uncertainty > opts.max_uncertainty {
            return Err(Error::QuantizationTooCoarse {
                width: r.value_uncertainty,
                limit: opts.max_uncertainty,
            });
        }
        curve.push(TuningPoint {
            param: gamma,
            value: r.value,
            uncertainty: r.value_uncertainty,
        });
    }
    if curve.is_empty() {
        return Err(Error::invalid("gammas", "must not be empty"));
    }
    let (param, value) = argmin(&curve);
    Ok(TuningResult { param, value, curve })
}

/// k-nearest-neighbor ERM under linear drift, over `k = 1..=n`; ties go to the smaller `k`.
pub fn tune_knn(n: usize, q: f64, delta: f64, opts: &RegretOptions) -> Result<TuningResult> {
    let d = DissimilarityProfile::drift(delta, n)?;
    let mut curve = Vec::with_capacity(n);
    for k in 1..=n {
        let policy = Policy::new(PolicySpec::nearest_neighbors(k, n), n)?;
        let r = worst_case_regret(&policy, q, &d, opts)?;
        curve.push(TuningPoint {
            param: k as f64,
            value: r.value,
            uncertainty: r.value_uncertainty,
        });
    }
    let (param, value) = argmin(&curve);
    Ok(TuningResult { param, value, curve })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> MixtureOptions {
        MixtureOptions {
            mu0_grid: 401,
            validation: RegretOptions {
                grid: 2001,
                ..RegretOptions::default()
            },
            ..MixtureOptions::default()
        }
    }

    #[test]
    fn single_sample_mixture_beats_pure_rank() {
        let d = DissimilarityProfile::constant(0.0, 1).unwrap();
        let sol = tune_mixture_fixed_k(1, 0.5, &d, &quick()).unwrap();
        assert!(sol.value <= 0.0625 + 1e-9);
        assert!(sol.certificate <= 1e-8);
        assert!((sol.lambdas.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unsorted_profile_rejected() {
        let d = DissimilarityProfile::new(vec![0.2, 0.1]).unwrap();
        let err = tune_mixture_fixed_k(2, 0.9, &d, &quick()).unwrap_err();
        assert_eq!(err, Error::UnsortedDissimilarities { index: 2 });
        assert!(tune_mixture_fixed_k(0, 0.9, &DissimilarityProfile::constant(0.1, 3).unwrap(), &quick()).is_err());
    }

    #[test]
    fn mixture_at_least_lower_bound() {
        let d = DissimilarityProfile::constant(0.1, 8).unwrap();
        for k in [1, 4, 8] {
            let sol = tune_mixture_fixed_k(k, 0.9, &d, &quick()).unwrap();
            assert!(sol.value >= 0.05 - 1e-9, "k={k}: {}", sol.value);
            assert!(sol.grid_value <= sol.value + 1e-12);
        }
    }

    #[test]
    fn curve_of_constant_zero_is_flat() {
        let opts = RegretOptions {
            grid: 201,
            ..RegretOptions::default()
        };
        let c = regret_curve(
            |_| PolicySpec::constant_zero(),
            0.9,
            |n| DissimilarityProfile::constant(0.1, n),
            1..=5,
            &opts,
        )
        .unwrap();
        assert!(c.iter().all(|(_, r)| (r.value - 0.9).abs() < 1e-12));
        assert!(regret_curve(
            PolicySpec::erm,
            0.9,
            |n| DissimilarityProfile::constant(0.1, n),
            1..1,
            &opts
        )
        .is_err());
    }

    #[test]
    fn exponential_gamma_one_is_erm() {
        let d = DissimilarityProfile::drift(0.005, 20).unwrap();
        let opts = RegretOptions {
            grid: 501,
            ..RegretOptions::default()
        };
        let a = worst_case_regret(&Policy::new(exponential_spec(1.0, 20), 20).unwrap(), 0.9, &d, &opts).unwrap();
        let b = worst_case_regret(&Policy::new(PolicySpec::erm(20), 20).unwrap(), 0.9, &d, &opts).unwrap();
        assert_eq!(a.value, b.value);
    }
}
