//! Brute-force and Monte Carlo cross-checks of the reductions used by the
//! regret engine. Everything here is `f64` and meant for small `n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BernoulliProfile, Branch, DissimilarityProfile, LossParams, Policy, PolicySpec};
use crate::policies::{action_order_statistic, action_werm, p_policy, PPoint};

/// Largest number of sample tuples [`exact_expected_regret`] will enumerate.
pub const ENUMERATION_BUDGET: usize = 1_000_000;
/// Largest number of tuple evaluations one [`bruteforce_worst_case`] call may spend.
pub const BRUTE_FORCE_BUDGET: u128 = 400_000_000;
/// Smallest accepted Monte Carlo sample size.
pub const MIN_TRIALS: usize = 10_000;

const SUM_TOL: f64 = 1e-12;

/// Finite distribution on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                field: "probs",
                expected: support.len(),
                found: probs.len(),
            });
        }
        if support.is_empty() {
            return Err(Error::invalid("support", "must not be empty"));
        }
        if support.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::invalid("support", "points must lie in [0, 1]"));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("support", "must be strictly increasing"));
        }
        if let Some(i) = probs.iter().position(|p| !(*p >= 0.0)) {
            return Err(Error::NegativeWeight {
                index: i,
                value: probs[i],
            });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::MixtureNotNormalized { sum });
        }
        Ok(Self { support, probs })
    }

    /// Distribution on `support` with CDF values `cdf` at the support points.
    pub fn from_cdf(support: Vec<f64>, cdf: &[f64]) -> Result<Self> {
        if cdf.len() != support.len() {
            return Err(Error::DimensionMismatch {
                field: "cdf",
                expected: support.len(),
                found: cdf.len(),
            });
        }
        if (cdf[cdf.len() - 1] - 1.0).abs() > SUM_TOL {
            return Err(Error::invalid("cdf", "must end at 1"));
        }
        let mut prev = 0.0;
        let mut probs = Vec::with_capacity(cdf.len());
        for &c in cdf {
            if c < prev - SUM_TOL {
                return Err(Error::invalid("cdf", "must be non-decreasing"));
            }
            probs.push((c - prev).max(0.0));
            prev = c;
        }
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        Self::new(support, probs)
    }

    pub fn point_mass(y: f64) -> Result<Self> {
        Self::new(vec![y], vec![1.0])
    }

    /// Two-point distribution on `{0, 1}` with mean `mu`.
    pub fn bernoulli(mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::invalid("mu", format!("must lie in [0, 1], got {mu}")));
        }
        Self::new(vec![0.0, 1.0], vec![1.0 - mu, mu])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(s, p)| s * p).sum()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let c: f64 = self
            .support
            .iter()
            .zip(&self.probs)
            .filter(|(s, _)| **s <= y)
            .map(|(_, p)| p)
            .sum();
        c.min(1.0)
    }

    /// `E[(a - Y)^+]`, which equals the integral of the CDF over `[0, a]`.
    fn cdf_integral(&self, a: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .map(|(s, p)| p * (a - s).max(0.0))
            .sum()
    }

    /// Expected cost of ordering `a`: `c_u (E[Y] - a) + (c_u + c_o) * int_0^a F`.
    pub fn expected_cost(&self, loss: &LossParams<f64>, a: f64) -> f64 {
        let scale = loss.underage() + loss.overage();
        loss.underage() * (self.mean() - a) + scale * self.cdf_integral(a)
    }

    /// Smallest expected cost; the cost is convex and piecewise linear with kinks on the support.
    pub fn optimal_cost(&self, loss: &LossParams<f64>) -> f64 {
        self.support
            .iter()
            .map(|&s| self.expected_cost(loss, s))
            .fold(f64::INFINITY, f64::min)
    }

    fn sample(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (s, p) in self.support.iter().zip(&self.probs) {
            acc += p;
            if u < acc {
                return *s;
            }
        }
        self.support[self.support.len() - 1]
    }
}

/// The deterministic components of a policy with their probabilities, each
/// represented by a mixture selector `u` accepted by [`Policy::action`].
fn components(policy: &Policy<f64>) -> Vec<(f64, f64)> {
    match policy.spec() {
        PolicySpec::MixtureOs { entries } => {
            let mut acc = 0.0;
            entries
                .iter()
                .map(|e| {
                    let u = acc + e.weight / 2.0;
                    acc += e.weight;
                    (e.weight, u)
                })
                .collect()
        }
        _ => vec![(1.0, 0.0)],
    }
}

/// Sample tuples over the product of supports, with every policy action precomputed.
struct Enumeration {
    /// Per tuple: support index of each sample.
    tuples: Vec<Vec<usize>>,
    /// Per tuple: `(probability, action)` for each policy component.
    actions: Vec<Vec<(f64, f64)>>,
}

impl Enumeration {
    fn new(policy: &Policy<f64>, q: f64, supports: &[&[f64]]) -> Result<Self> {
        let n = supports.len();
        let mut count: usize = 1;
        for s in supports {
            count = count
                .checked_mul(s.len())
                .filter(|&c| c <= ENUMERATION_BUDGET)
                .ok_or_else(|| Error::BudgetExceeded {
                    required: supports.iter().map(|s| s.len() as u128).product(),
                    budget: ENUMERATION_BUDGET as u128,
                })?;
        }
        let comps = components(policy);
        let mut tuples = Vec::with_capacity(count);
        let mut actions = Vec::with_capacity(count);
        let mut idx = vec![0usize; n];
        let mut y = vec![0.0; n];
        for _ in 0..count {
            for i in 0..n {
                y[i] = supports[i][idx[i]];
            }
            let acts = comps
                .iter()
                .map(|&(w, u)| Ok((w, policy.action(q, &y, u)?)))
                .collect::<Result<Vec<_>>>()?;
            tuples.push(idx.clone());
            actions.push(acts);
            for i in 0..n {
                idx[i] += 1;
                if idx[i] < supports[i].len() {
                    break;
                }
                idx[i] = 0;
            }
        }
        Ok(Self { tuples, actions })
    }

    fn regret(&self, loss: &LossParams<f64>, f0: &DiscreteDistribution, hs: &[&DiscreteDistribution]) -> f64 {
        let mut total = 0.0;
        for (tuple, acts) in self.tuples.iter().zip(&self.actions) {
            let mut prob = 1.0;
            for (h, &j) in hs.iter().zip(tuple) {
                prob *= h.probs[j];
                if prob == 0.0 {
                    break;
                }
            }
            if prob == 0.0 {
                continue;
            }
            let cost: f64 = acts.iter().map(|&(w, a)| w * f0.expected_cost(loss, a)).sum();
            total += prob * cost;
        }
        total - f0.optimal_cost(loss)
    }
}

/// Expected regret of `policy` when sample `i` is drawn from `hs[i]` and the
/// decision is evaluated against `f0`, by enumerating every sample tuple.
pub fn exact_expected_regret(
    policy: &Policy<f64>,
    q: f64,
    f0: &DiscreteDistribution,
    hs: &[DiscreteDistribution],
) -> Result<f64> {
    if hs.len() != policy.n() {
        return Err(Error::DimensionMismatch {
            field: "hs",
            expected: policy.n(),
            found: hs.len(),
        });
    }
    let loss = LossParams::from_quantile(q)?;
    let supports: Vec<&[f64]> = hs.iter().map(|h| h.support()).collect();
    let refs: Vec<&DiscreteDistribution> = hs.iter().collect();
    Ok(Enumeration::new(policy, q, &supports)?.regret(&loss, f0, &refs))
}

/// [`exact_expected_regret`] for Bernoulli distributions.
pub fn exact_regret_bernoulli(policy: &Policy<f64>, q: f64, profile: &BernoulliProfile<f64>) -> Result<f64> {
    let f0 = DiscreteDistribution::bernoulli(profile.mu0())?;
    let hs = profile
        .mus()
        .iter()
        .map(|&m| DiscreteDistribution::bernoulli(m))
        .collect::<Result<Vec<_>>>()?;
    exact_expected_regret(policy, q, &f0, &hs)
}

/// Outcome of [`bruteforce_worst_case`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceReport {
    pub value: f64,
    pub f0: DiscreteDistribution,
    pub hs: Vec<DiscreteDistribution>,
    /// How far below the true supremum the grid search may land: one CDF
    /// level times the regret's sensitivity `1 + n` to sup-norm CDF changes.
    pub slack: f64,
    pub evaluations: u128,
}

/// Non-decreasing sequences with `seq[j]` drawn from `choices[j]` and last entry 1.
fn monotone_cdfs(choices: &[Vec<f64>]) -> Vec<Vec<f64>> {
    fn walk(choices: &[Vec<f64>], prefix: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        let j = prefix.len();
        if j == choices.len() {
            out.push(prefix.clone());
            return;
        }
        let floor = prefix.last().copied().unwrap_or(0.0);
        for &c in &choices[j] {
            if c >= floor - SUM_TOL {
                prefix.push(c.max(floor));
                walk(choices, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(choices, &mut Vec::with_capacity(choices.len()), &mut out);
    out
}

/// CDF values at point `j` allowed for a history within `d` of `f0j`: the
/// grid levels inside the box plus the two box edges.
fn box_choices(levels: &[f64], f0: &[f64], d: f64) -> Vec<Vec<f64>> {
    let last = f0.len() - 1;
    f0.iter()
        .enumerate()
        .map(|(j, &c)| {
            if j == last {
                return vec![1.0];
            }
            let (lo, hi) = ((c - d).max(0.0), (c + d).min(1.0));
            let mut v: Vec<f64> = levels.iter().copied().filter(|&l| l >= lo && l <= hi).collect();
            v.push(lo);
            v.push(hi);
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite levels"));
            v.dedup_by(|a, b| (*a - *b).abs() <= SUM_TOL);
            v
        })
        .collect()
}

/// Supremum of the expected regret over distributions on an `m`-point
/// support grid whose CDF values lie on a `g`-level grid, with each history
/// `i` within Kolmogorov distance `d_i` of the out-of-sample distribution.
///
/// The out-of-sample CDF is enumerated exhaustively. With one sample the
/// history is enumerated too; otherwise histories are found by coordinate
/// ascent from three starts (unshifted and both box edges).
pub fn bruteforce_worst_case(
    policy: &Policy<f64>,
    q: f64,
    d: &DissimilarityProfile<f64>,
    m: usize,
    g: usize,
) -> Result<BruteForceReport> {
    let n = policy.n();
    if d.len() != n {
        return Err(Error::DimensionMismatch {
            field: "dissimilarity",
            expected: n,
            found: d.len(),
        });
    }
    if !(1..=3).contains(&n) {
        return Err(Error::invalid(
            "n",
            format!("brute force supports 1..=3 samples, got {n}"),
        ));
    }
    if !(2..=5).contains(&m) {
        return Err(Error::invalid(
            "m",
            format!("support grid must have 2..=5 points, got {m}"),
        ));
    }
    if !(2..=101).contains(&g) {
        return Err(Error::invalid(
            "g",
            format!("CDF grid must have 2..=101 levels, got {g}"),
        ));
    }
    let loss = LossParams::from_quantile(q)?;
    let support: Vec<f64> = (0..m).map(|j| j as f64 / (m - 1) as f64).collect();
    let levels: Vec<f64> = (0..g).map(|k| k as f64 / (g - 1) as f64).collect();
    let supports: Vec<&[f64]> = vec![&support; n];
    let table = Enumeration::new(policy, q, &supports)?;
    let per_eval = table.tuples.len() as u128;

    let mut f0_choices = vec![levels.clone(); m];
    f0_choices[m - 1] = vec![1.0];
    let f0_grid = monotone_cdfs(&f0_choices);

    let mut evaluations: u128 = 0;
    let mut best: Option<(f64, DiscreteDistribution, Vec<DiscreteDistribution>)> = None;
    for f0_cdf in &f0_grid {
        let f0 = DiscreteDistribution::from_cdf(support.clone(), f0_cdf)?;
        let candidates: Vec<Vec<DiscreteDistribution>> = d
            .values()
            .iter()
            .map(|&di| {
                monotone_cdfs(&box_choices(&levels, f0_cdf, di))
                    .into_iter()
                    .map(|c| DiscreteDistribution::from_cdf(support.clone(), &c))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut eval = |hs: &[&DiscreteDistribution]| -> Result<f64> {
            evaluations += per_eval;
            if evaluations > BRUTE_FORCE_BUDGET {
                return Err(Error::BudgetExceeded {
                    required: evaluations,
                    budget: BRUTE_FORCE_BUDGET,
                });
            }
            Ok(table.regret(&loss, &f0, hs))
        };
        let (value, choice) = if n == 1 {
            let mut top = (f64::NEG_INFINITY, 0);
            for (k, h) in candidates[0].iter().enumerate() {
                let v = eval(&[h])?;
                if v > top.0 {
                    top = (v, k);
                }
            }
            (top.0, vec![top.1])
        } else {
            coordinate_ascent(&candidates, f0_cdf, &mut eval)?
        };
        if best.as_ref().is_none_or(|b| value > b.0) {
            let hs = choice.iter().zip(&candidates).map(|(&k, c)| c[k].clone()).collect();
            best = Some((value, f0, hs));
        }
    }
    let (value, f0, hs) = best.expect("at least one out-of-sample CDF");
    Ok(BruteForceReport {
        value,
        f0,
        hs,
        slack: (1.0 + n as f64) / (g - 1) as f64,
        evaluations,
    })
}

fn coordinate_ascent(
    candidates: &[Vec<DiscreteDistribution>],
    f0_cdf: &[f64],
    eval: &mut impl FnMut(&[&DiscreteDistribution]) -> Result<f64>,
) -> Result<(f64, Vec<usize>)> {
    const SWEEPS: usize = 20;
    // Index of the candidate closest to a target CDF, by sup-norm.
    let nearest = |cands: &[DiscreteDistribution], target: &dyn Fn(usize, f64) -> f64| -> usize {
        let dist = |c: &DiscreteDistribution| {
            let mut acc = 0.0;
            let mut worst: f64 = 0.0;
            for (j, p) in c.probs.iter().enumerate() {
                acc += p;
                worst = worst.max((acc - target(j, f0_cdf[j])).abs());
            }
            worst
        };
        (0..cands.len())
            .min_by(|&a, &b| dist(&cands[a]).partial_cmp(&dist(&cands[b])).expect("finite"))
            .expect("box contains the out-of-sample CDF")
    };
    let starts: [&dyn Fn(usize, f64) -> f64; 3] = [&|_, c| c, &|_, _| 0.0, &|_, _| 1.0];
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for start in starts {
        let mut choice: Vec<usize> = candidates.iter().map(|c| nearest(c, start)).collect();
        let mut current = {
            let hs: Vec<&DiscreteDistribution> = choice.iter().zip(candidates).map(|(&k, c)| &c[k]).collect();
            eval(&hs)?
        };
        for _ in 0..SWEEPS {
            let mut improved = false;
            for i in 0..candidates.len() {
                for k in 0..candidates[i].len() {
                    if k == choice[i] {
                        continue;
                    }
                    let mut trial = choice.clone();
                    trial[i] = k;
                    let hs: Vec<&DiscreteDistribution> = trial.iter().zip(candidates).map(|(&k, c)| &c[k]).collect();
                    let v = eval(&hs)?;
                    if v > current + 1e-15 {
                        current = v;
                        choice = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        if current > best.0 {
            best = (current, choice);
        }
    }
    Ok(best)
}

/// Largest change in exact regret from moving one history mean `step` toward `mu0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstHistoryCheck {
    pub base: f64,
    pub best_perturbed: f64,
}

impl WorstHistoryCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.best_perturbed <= self.base + tol
    }
}

/// Moves each extreme history mean of `branch` at `mu0` back toward `mu0` by
/// `step`, and both ways when it sits at a clamp, recording the largest regret seen.
pub fn check_worst_history(
    policy: &Policy<f64>,
    q: f64,
    d: &DissimilarityProfile<f64>,
    branch: Branch,
    mu0: f64,
    step: f64,
) -> Result<WorstHistoryCheck> {
    let profile = BernoulliProfile::extreme(branch, mu0, d);
    let base = exact_regret_bernoulli(policy, q, &profile)?;
    let mut best_perturbed = f64::NEG_INFINITY;
    for i in 0..profile.mus().len() {
        let di = d.values()[i];
        let (lo, hi) = ((mu0 - di).max(0.0), (mu0 + di).min(1.0));
        for delta in [-step, step] {
            let moved = profile.mus()[i] + delta;
            if moved < lo - 1e-15 || moved > hi + 1e-15 {
                continue;
            }
            let mut mus = profile.mus().to_vec();
            mus[i] = moved.clamp(lo, hi);
            let v = exact_regret_bernoulli(policy, q, &BernoulliProfile::new(mu0, mus))?;
            best_perturbed = best_perturbed.max(v);
        }
    }
    Ok(WorstHistoryCheck { base, best_perturbed })
}

/// Empirical CDF of the policy's action at each `z`, from `trials` draws of
/// the samples (and of the mixture component) with a ChaCha generator seeded by `seed`.
pub fn mc_action_cdf(
    policy: &Policy<f64>,
    q: f64,
    hs: &[DiscreteDistribution],
    z_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if hs.len() != policy.n() {
        return Err(Error::DimensionMismatch {
            field: "hs",
            expected: policy.n(),
            found: hs.len(),
        });
    }
    if trials < MIN_TRIALS {
        return Err(Error::invalid(
            "trials",
            format!("must be at least {MIN_TRIALS}, got {trials}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0usize; z_grid.len()];
    let mut y = vec![0.0; hs.len()];
    for _ in 0..trials {
        for (yi, h) in y.iter_mut().zip(hs) {
            *yi = h.sample(rng.gen());
        }
        let a = policy.action(q, &y, rng.gen())?;
        for (hit, &z) in hits.iter_mut().zip(z_grid) {
            if a <= z {
                *hit += 1;
            }
        }
    }
    Ok(hits.into_iter().map(|h| h as f64 / trials as f64).collect())
}

/// Monte Carlo and predicted action CDF at one `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparabilityPoint {
    pub z: f64,
    pub empirical: f64,
    pub predicted: f64,
    pub std_error: f64,
}

impl SeparabilityPoint {
    /// Within three standard errors, with a one-draw floor for degenerate predictions.
    pub fn agrees(&self, trials: usize) -> bool {
        (self.empirical - self.predicted).abs() <= 3.0 * self.std_error + 1.0 / trials as f64
    }
}

/// Compares [`mc_action_cdf`] with `P(H_1(z), ..., H_n(z))` at each `z`.
/// The identity holds on `[0, 1)`; at `z = 1` every action counts.
pub fn check_separability(
    policy: &Policy<f64>,
    q: f64,
    hs: &[DiscreteDistribution],
    z_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<SeparabilityPoint>> {
    if let Some(z) = z_grid.iter().find(|z| !(**z >= 0.0 && **z < 1.0)) {
        return Err(Error::invalid("z", format!("must lie in [0, 1), got {z}")));
    }
    let emp = mc_action_cdf(policy, q, hs, z_grid, trials, seed)?;
    z_grid
        .iter()
        .zip(emp)
        .map(|(&z, empirical)| {
            let h = PPoint::new(hs.iter().map(|h| h.cdf(z)).collect())?;
            let predicted = p_policy(policy, &h, q)?;
            let std_error = (predicted * (1.0 - predicted) / trials as f64).sqrt();
            Ok(SeparabilityPoint {
                z,
                empirical,
                predicted,
                std_error,
            })
        })
        .collect()
}

/// Result of testing a weighted ERM policy against every order-statistic policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderStatisticTest {
    /// Actions on `(0.1, 0.2, 0.3, 0.4)` and on `(0.3, 0.2, 0.1, 0.4)`.
    pub actions: (f64, f64),
    /// Some `(subset, rank)` reproducing the policy on all permutations of the
    /// four outcomes, if one exists. Subsets are 0-based.
    pub matching: Option<(Vec<usize>, usize)>,
}

/// Looks for an order-statistic policy on four samples that agrees with
/// weighted ERM with the given weights on every ordering of `(0.1, 0.2, 0.3, 0.4)`.
pub fn order_statistic_match(weights: &[f64], q: f64) -> Result<OrderStatisticTest> {
    if weights.len() != 4 {
        return Err(Error::DimensionMismatch {
            field: "weights",
            expected: 4,
            found: weights.len(),
        });
    }
    let base = [0.1, 0.2, 0.3, 0.4];
    let actions = (
        action_werm(weights, q, &base)?,
        action_werm(weights, q, &[0.3, 0.2, 0.1, 0.4])?,
    );
    let mut perms = Vec::new();
    permutations(&mut base.to_vec(), 0, &mut perms);
    let targets = perms
        .iter()
        .map(|y| action_werm(weights, q, y))
        .collect::<Result<Vec<_>>>()?;
    let mut matching = None;
    'search: for mask in 0usize..16 {
        let subset: Vec<usize> = (0..4).filter(|i| mask & (1 << i) != 0).collect();
        for rank in 0..=subset.len() + 1 {
            if perms
                .iter()
                .zip(&targets)
                .all(|(y, &t)| action_order_statistic(&subset, rank, y) == t)
            {
                matching = Some((subset, rank));
                break 'search;
            }
        }
    }
    Ok(OrderStatisticTest { actions, matching })
}

fn permutations(v: &mut Vec<f64>, k: usize, out: &mut Vec<Vec<f64>>) {
    if k == v.len() {
        out.push(v.clone());
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permutations(v, k + 1, out);
        v.swap(k, i);
    }
}

/// Weighted ERM with weights `(2, 1, 1, 1)` at `q = 0.5` picks 0.2 on
/// `(0.1, 0.2, 0.3, 0.4)` and 0.3 on `(0.3, 0.2, 0.1, 0.4)`, and no
/// order-statistic policy reproduces it.
pub fn verify_not_order_statistic() -> bool {
    match order_statistic_match(&[2.0, 1.0, 1.0, 1.0], 0.5) {
        Ok(t) => t.actions == (0.2, 0.3) && t.matching.is_none(),
        Err(_) => false,
    }
}
