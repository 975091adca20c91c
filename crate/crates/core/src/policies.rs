//! Policy actions on realized samples and the separable function `P(h)`,
//! the probability that a policy's action is at most `z` when the sample
//! CDFs evaluated at `z` are `h_1..h_n`.
//!
//! Every supported policy is a counting policy: whether its action is below
//! `z` only depends on the indicators `1{y_i <= z}`. `P(h)` is therefore the
//! expectation of the counting function under independent Bernoulli(`h_i`)
//! indicators, which is what the tail routines below compute.

use crate::error::{Error, Result};
use crate::model::{Policy, PolicySpec};
use crate::scalar::{ceil_tol, ln_choose, Real};

/// Sample CDF values `H_1(z)..H_n(z)` at a common point `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct PPoint<T> {
    h: Vec<T>,
}

impl<T: Real> PPoint<T> {
    pub fn new(h: Vec<T>) -> Result<Self> {
        if let Some(i) = h.iter().position(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(Error::invalid(
                "h",
                format!("coordinate {} must lie in [0, 1], got {}", i + 1, h[i]),
            ));
        }
        Ok(Self { h })
    }

    pub fn values(&self) -> &[T] {
        &self.h
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// How general weighted thresholds are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum WeightedMode {
    /// Distinct partial sums are tracked, merging sums closer than `1e-12`.
    /// Fails with [`Error::ExactEvaluationInfeasible`] past [`EXACT_STATE_LIMIT`] states.
    #[default]
    Exact,
    /// Partial sums (normalized to total weight 1) closer than `1 / resolution`
    /// are merged into intervals; the result is a bracket.
    Quantized { resolution: f64 },
}

/// Default denominator of the quantized mode.
pub const DEFAULT_RESOLUTION: f64 = 1e6;

/// Largest number of partial-sum states the exact mode keeps.
pub const EXACT_STATE_LIMIT: usize = 1 << 23;

/// Partial sums closer than this are considered equal in exact mode.
pub const EXACT_MERGE_TOL: f64 = 1e-12;

/// Lower and upper bounds on a probability. Both coincide for exact evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBracket<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Real> TailBracket<T> {
    pub fn exact(p: T) -> Self {
        Self { lower: p, upper: p }
    }

    pub fn width(&self) -> T {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> T {
        (self.lower + self.upper) / T::lit(2.0)
    }
}

/// Whether the weighted threshold `sum w_i b_i >= q sum w_i` holds (equality counts).
pub fn counting_werm<T: Real>(weights: &[T], q: T, b: &[bool]) -> Result<bool> {
    if weights.len() != b.len() {
        return Err(Error::DimensionMismatch {
            field: "indicators",
            expected: weights.len(),
            found: b.len(),
        });
    }
    let total = checked_total(weights)?;
    let hit: T = weights.iter().zip(b).filter(|(_, bi)| **bi).map(|(w, _)| *w).sum();
    Ok(reaches(hit, q * total, total))
}

fn checked_total<T: Real>(weights: &[T]) -> Result<T> {
    if let Some(i) = weights.iter().position(|w| !(*w >= T::zero()) || !w.is_finite()) {
        return Err(Error::NegativeWeight {
            index: i,
            value: weights[i].as_f64(),
        });
    }
    let total: T = weights.iter().copied().sum();
    if total <= T::zero() {
        return Err(Error::invalid("weights", "must not all be zero"));
    }
    Ok(total)
}

fn reaches<T: Real>(value: T, threshold: T, scale: T) -> bool {
    value >= threshold - T::threshold_tol() * scale
}

fn check_outcomes<T: Real>(y: &[T]) -> Result<()> {
    if let Some(i) = y.iter().position(|v| !(*v >= T::zero() && *v <= T::one())) {
        return Err(Error::invalid(
            "y",
            format!("outcome {} must lie in [0, 1], got {}", i + 1, y[i]),
        ));
    }
    Ok(())
}

/// Smallest action in `{0} ∪ y` at which the weighted threshold is met.
pub fn action_werm<T: Real>(weights: &[T], q: T, y: &[T]) -> Result<T> {
    if weights.len() != y.len() {
        return Err(Error::DimensionMismatch {
            field: "outcomes",
            expected: weights.len(),
            found: y.len(),
        });
    }
    check_outcomes(y)?;
    let total = checked_total(weights)?;
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).expect("outcomes are finite"));
    let target = q * total;
    let mut cum = T::zero();
    let mut i = 0;
    // Candidate 0 first, then each distinct outcome in increasing order.
    let mut a = T::zero();
    loop {
        while i < order.len() && y[order[i]] <= a {
            cum = cum + weights[order[i]];
            i += 1;
        }
        if reaches(cum, target, total) {
            return Ok(a);
        }
        if i == order.len() {
            return Ok(T::one());
        }
        a = y[order[i]];
    }
}

/// The `rank`-th smallest outcome among `y[subset]`, with 0 for rank 0 and 1
/// for ranks beyond the subset size.
pub fn action_order_statistic<T: Real>(subset: &[usize], rank: usize, y: &[T]) -> T {
    if rank == 0 {
        return T::zero();
    }
    if rank > subset.len() {
        return T::one();
    }
    let mut vals: Vec<T> = subset.iter().map(|&i| y[i]).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("outcomes are finite"));
    vals[rank - 1]
}

/// Smallest `a` in `{0} ∪ y` whose indicator pattern the table maps to 1.
fn action_table<T: Real>(table: &[bool], y: &[T]) -> T {
    let mut candidates: Vec<T> = y.to_vec();
    candidates.push(T::zero());
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("outcomes are finite"));
    for a in candidates {
        let mask = y
            .iter()
            .enumerate()
            .filter(|(_, v)| **v <= a)
            .fold(0usize, |m, (i, _)| m | (1 << i));
        if table[mask] {
            return a;
        }
    }
    T::one()
}

impl<T: Real> Policy<T> {
    /// Action on the outcomes `y`. `u` in `[0, 1)` selects the mixture component
    /// by inverse CDF and is ignored by deterministic policies.
    pub fn action(&self, q: T, y: &[T], u: T) -> Result<T> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                field: "outcomes",
                expected: self.n(),
                found: y.len(),
            });
        }
        check_outcomes(y)?;
        match self.spec() {
            PolicySpec::WeightedErm { weights } => action_werm(weights, q, y),
            PolicySpec::OrderStatistic { subset, rank } => Ok(action_order_statistic(subset, *rank, y)),
            PolicySpec::MixtureOs { entries } => {
                let mut acc = T::zero();
                let last = entries.len() - 1;
                for (i, e) in entries.iter().enumerate() {
                    acc = acc + e.weight;
                    if u < acc || i == last {
                        return Ok(action_order_statistic(&e.subset, e.rank, y));
                    }
                }
                unreachable!("mixture has at least one entry")
            }
            PolicySpec::TabulatedCounting { table, .. } => Ok(action_table(table, y)),
        }
    }

    /// Counting function: whether the action is at most `z` given the indicators `1{y_i <= z}`.
    /// Mixtures return the probability of that event.
    pub fn counting(&self, q: T, b: &[bool]) -> Result<T> {
        let h: Vec<T> = b.iter().map(|&bi| if bi { T::one() } else { T::zero() }).collect();
        p_policy(self, &PPoint::new(h)?, q)
    }
}

/// `Pr(sum B_i >= m)` for independent `B_i ~ Bernoulli(probs[i])`.
///
/// Runs in `O(n * min(m, n - m))` by tracking whichever of successes or
/// failures stays below its cap.
pub fn poisson_binomial_tail<T: Real>(probs: &[T], m: usize) -> T {
    let n = probs.len();
    if m == 0 {
        return T::one();
    }
    if m > n {
        return T::zero();
    }
    let cap = n - m;
    if cap < m {
        // dp[f] = Pr(f failures so far), f <= cap; mass beyond cap is dropped.
        let mut dp = vec![T::zero(); cap + 1];
        dp[0] = T::one();
        for &p in probs {
            let fail = T::one() - p;
            for f in (1..=cap).rev() {
                dp[f] = dp[f] * p + dp[f - 1] * fail;
            }
            dp[0] = dp[0] * p;
        }
        dp.into_iter().sum()
    } else {
        // dp[s] = Pr(s successes so far), s < m; dp[m] absorbs.
        let mut dp = vec![T::zero(); m + 1];
        dp[0] = T::one();
        for &p in probs {
            let fail = T::one() - p;
            dp[m] = dp[m] + dp[m - 1] * p;
            for s in (1..m).rev() {
                dp[s] = dp[s] * fail + dp[s - 1] * p;
            }
            dp[0] = dp[0] * fail;
        }
        dp[m]
    }
}

/// Full probability mass function of a Poisson-binomial count.
pub fn poisson_binomial_pmf<T: Real>(probs: &[T]) -> Vec<T> {
    let n = probs.len();
    let mut dp = vec![T::zero(); n + 1];
    dp[0] = T::one();
    for (k, &p) in probs.iter().enumerate() {
        let fail = T::one() - p;
        for j in (1..=k + 1).rev() {
            dp[j] = dp[j] * fail + dp[j - 1] * p;
        }
        dp[0] = dp[0] * fail;
    }
    dp
}

/// Binomial(n, p) probability mass function, built outward from the mode so
/// that no term is computed by subtraction.
pub fn binomial_pmf<T: Real>(n: usize, p: T) -> Vec<T> {
    let mut pmf = vec![T::zero(); n + 1];
    if p <= T::zero() {
        pmf[0] = T::one();
        return pmf;
    }
    if p >= T::one() {
        pmf[n] = T::one();
        return pmf;
    }
    let ratio = p / (T::one() - p);
    let mode = mode_of(n, p);
    pmf[mode] = binomial_term(n, p, mode);
    for j in mode..n {
        pmf[j + 1] = pmf[j] * T::from_count(n - j) / T::from_count(j + 1) * ratio;
    }
    for j in (1..=mode).rev() {
        pmf[j - 1] = pmf[j] * T::from_count(j) / T::from_count(n - j + 1) / ratio;
    }
    let total: T = pmf.iter().copied().sum();
    pmf.iter_mut().for_each(|v| *v = *v / total);
    pmf
}

fn mode_of<T: Real>(n: usize, p: T) -> usize {
    (T::from_count(n + 1) * p).floor().to_usize().unwrap_or(0).min(n)
}

fn binomial_term<T: Real>(n: usize, p: T, j: usize) -> T {
    let lp = p.ln();
    let lq = (-p).ln_1p();
    (ln_choose::<T>(n, j) + T::from_count(j) * lp + T::from_count(n - j) * lq).exp()
}

/// `Pr(Binomial(n, p) >= m)`, summing only the terms on the short side of the mode.
pub fn binomial_tail<T: Real>(n: usize, p: T, m: usize) -> T {
    if m == 0 {
        return T::one();
    }
    if m > n {
        return T::zero();
    }
    if p <= T::zero() {
        return T::zero();
    }
    if p >= T::one() {
        return T::one();
    }
    let ratio = p / (T::one() - p);
    let tiny = T::epsilon() * T::lit(1e-3);
    if m > mode_of(n, p) {
        // Terms decrease from j = m upward.
        let mut term = binomial_term(n, p, m);
        let mut sum = term;
        for j in m..n {
            term = term * T::from_count(n - j) / T::from_count(j + 1) * ratio;
            sum = sum + term;
            if term <= tiny * sum {
                break;
            }
        }
        sum.min(T::one())
    } else {
        // Terms decrease from j = m - 1 downward.
        let mut term = binomial_term(n, p, m - 1);
        let mut sum = term;
        for j in (1..m).rev() {
            term = term * T::from_count(j) / T::from_count(n - j + 1) / ratio;
            sum = sum + term;
            if term <= tiny * sum {
                break;
            }
        }
        (T::one() - sum).max(T::zero())
    }
}

/// Exact `Pr(sum w_i B_i >= q sum w_i)` (equality inclusive).
pub fn weighted_threshold_tail<T: Real>(weights: &[T], probs: &[T], q: T) -> Result<T> {
    Ok(WeightedKernel::new(weights, q)?.tail(probs, WeightedMode::Exact)?.upper)
}

/// Bracket on `Pr(sum w_i B_i >= q sum w_i)` with partial sums merged at resolution `1 / resolution`.
pub fn weighted_threshold_bracket<T: Real>(
    weights: &[T],
    probs: &[T],
    q: T,
    resolution: f64,
) -> Result<TailBracket<T>> {
    WeightedKernel::new(weights, q)?.tail(probs, WeightedMode::Quantized { resolution })
}

/// Precomputed weight ordering for repeated weighted-threshold evaluations.
#[derive(Debug, Clone)]
struct WeightedKernel<T> {
    /// Sample indices with positive weight, heaviest first.
    order: Vec<usize>,
    /// Normalized weights in `order`.
    w: Vec<T>,
    /// `rest[j]` is the total normalized weight after position `j`.
    rest: Vec<T>,
    q: T,
    n: usize,
}

#[derive(Debug, Clone, Copy)]
struct SumState<T> {
    lo: T,
    hi: T,
    p: T,
}

impl<T: Real> WeightedKernel<T> {
    fn new(weights: &[T], q: T) -> Result<Self> {
        let total = checked_total(weights)?;
        let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > T::zero()).collect();
        order.sort_by(|&a, &b| {
            weights[b]
                .partial_cmp(&weights[a])
                .expect("weights are finite")
                .then(a.cmp(&b))
        });
        let w: Vec<T> = order.iter().map(|&i| weights[i] / total).collect();
        let mut rest = vec![T::zero(); w.len()];
        for j in (0..w.len().saturating_sub(1)).rev() {
            rest[j] = rest[j + 1] + w[j + 1];
        }
        Ok(Self {
            order,
            w,
            rest,
            q,
            n: weights.len(),
        })
    }

    fn tail(&self, probs: &[T], mode: WeightedMode) -> Result<TailBracket<T>> {
        if probs.len() != self.n {
            return Err(Error::DimensionMismatch {
                field: "h",
                expected: self.n,
                found: probs.len(),
            });
        }
        let (merge, limit) = match mode {
            WeightedMode::Exact => (T::lit(EXACT_MERGE_TOL), EXACT_STATE_LIMIT),
            WeightedMode::Quantized { resolution } => {
                if !(resolution >= 1.0) {
                    return Err(Error::invalid(
                        "resolution",
                        format!("must be at least 1, got {resolution}"),
                    ));
                }
                (T::lit(1.0 / resolution), usize::MAX)
            }
        };
        let bucketed = matches!(mode, WeightedMode::Quantized { .. });
        let tol = T::threshold_tol();
        let reach = self.q - tol;
        let mut sure = T::zero();
        let mut states = vec![SumState {
            lo: T::zero(),
            hi: T::zero(),
            p: T::one(),
        }];
        let mut next: Vec<SumState<T>> = Vec::with_capacity(2);
        for (j, &i) in self.order.iter().enumerate() {
            let (h, w, rest) = (probs[i], self.w[j], self.rest[j]);
            let miss = T::one() - h;
            next.clear();
            let (mut a, mut b) = (0, 0);
            while a < states.len() || b < states.len() {
                let take_a = b == states.len() || (a < states.len() && states[a].lo <= states[b].lo + w);
                let c = if take_a {
                    let s = states[a];
                    a += 1;
                    SumState { p: s.p * miss, ..s }
                } else {
                    let s = states[b];
                    b += 1;
                    SumState {
                        lo: s.lo + w,
                        hi: s.hi + w,
                        p: s.p * h,
                    }
                };
                if c.p <= T::zero() {
                    continue;
                }
                if c.lo >= reach {
                    sure = sure + c.p;
                    continue;
                }
                if c.hi + rest < reach - tol {
                    continue;
                }
                let joins = |last: &SumState<T>| {
                    if bucketed {
                        // Fixed cells keep the state count below `resolution + 1`.
                        (c.lo / merge).floor() == (last.lo / merge).floor()
                    } else {
                        c.hi.max(last.hi) - last.lo <= merge
                    }
                };
                match next.last_mut() {
                    Some(last) if joins(last) => {
                        last.hi = last.hi.max(c.hi);
                        last.p = last.p + c.p;
                    }
                    _ => next.push(c),
                }
            }
            if next.len() > limit {
                return Err(Error::ExactEvaluationInfeasible { n: self.n, limit });
            }
            std::mem::swap(&mut states, &mut next);
        }
        let ambiguous: T = states.iter().filter(|s| s.hi >= reach).map(|s| s.p).sum();
        let upper = (sure + ambiguous).min(T::one());
        Ok(match mode {
            WeightedMode::Exact => TailBracket::exact(upper),
            WeightedMode::Quantized { .. } => TailBracket {
                lower: sure.min(T::one()),
                upper,
            },
        })
    }
}

/// Evaluator for `P(h)` of a validated policy, reusable across many points.
#[derive(Debug, Clone)]
pub struct PEvaluator<T> {
    kind: Kind<T>,
    mode: WeightedMode,
    n: usize,
}

/// A subset with the `(rank, weight)` entries that share it.
type RankGroup<T> = (Vec<usize>, Vec<(usize, T)>);

#[derive(Debug, Clone)]
enum Kind<T> {
    /// At least `m` of the indicators on `subset` are 1.
    Threshold {
        subset: Vec<usize>,
        m: usize,
    },
    Weighted(WeightedKernel<T>),
    /// Groups of mixture entries sharing a subset, with their ranks and weights.
    Mixture(Vec<RankGroup<T>>),
    Table(Vec<bool>),
}

impl<T: Real> PEvaluator<T> {
    pub fn new(policy: &Policy<T>, q: T, mode: WeightedMode) -> Result<Self> {
        if !(q > T::zero() && q < T::one()) {
            return Err(Error::invalid("q", format!("must lie in (0, 1), got {q}")));
        }
        let kind = match policy.spec() {
            PolicySpec::WeightedErm { weights } => {
                let support: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > T::zero()).collect();
                let w0 = weights[support[0]];
                if support.iter().all(|&i| weights[i] == w0) {
                    let m = ceil_tol(q * T::from_count(support.len()));
                    Kind::Threshold { subset: support, m }
                } else {
                    Kind::Weighted(WeightedKernel::new(weights, q)?)
                }
            }
            PolicySpec::OrderStatistic { subset, rank } => Kind::Threshold {
                subset: subset.clone(),
                m: *rank,
            },
            PolicySpec::MixtureOs { entries } => {
                let mut groups: Vec<RankGroup<T>> = Vec::new();
                for e in entries {
                    match groups.iter_mut().find(|(s, _)| *s == e.subset) {
                        Some((_, ranks)) => ranks.push((e.rank, e.weight)),
                        None => groups.push((e.subset.clone(), vec![(e.rank, e.weight)])),
                    }
                }
                Kind::Mixture(groups)
            }
            PolicySpec::TabulatedCounting { table, .. } => Kind::Table(table.clone()),
        };
        Ok(Self {
            kind,
            mode,
            n: policy.n(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether evaluations can return a non-trivial bracket.
    pub fn is_quantized(&self) -> bool {
        matches!(self.kind, Kind::Weighted(_)) && matches!(self.mode, WeightedMode::Quantized { .. })
    }

    /// `P(h)` as a bracket; exact kinds return a degenerate bracket.
    pub fn eval(&self, h: &[T]) -> Result<TailBracket<T>> {
        if h.len() != self.n {
            return Err(Error::DimensionMismatch {
                field: "h",
                expected: self.n,
                found: h.len(),
            });
        }
        Ok(match &self.kind {
            Kind::Threshold { subset, m } => TailBracket::exact(subset_tail(subset, *m, h)),
            Kind::Weighted(kernel) => kernel.tail(h, self.mode)?,
            Kind::Mixture(groups) => {
                let mut total = T::zero();
                for (subset, ranks) in groups {
                    let tails = subset_tails(subset, h);
                    for &(r, lambda) in ranks {
                        total = total + lambda * tails.get(r).copied().unwrap_or_else(T::zero);
                    }
                }
                TailBracket::exact(total.min(T::one()))
            }
            Kind::Table(table) => TailBracket::exact(table_expectation(table, h)),
        })
    }
}

fn gather<T: Real>(subset: &[usize], h: &[T]) -> (Vec<T>, bool) {
    let probs: Vec<T> = subset.iter().map(|&i| h[i]).collect();
    let equal = probs.windows(2).all(|w| w[0] == w[1]);
    (probs, equal)
}

fn subset_tail<T: Real>(subset: &[usize], m: usize, h: &[T]) -> T {
    if m == 0 {
        return T::one();
    }
    if m > subset.len() {
        return T::zero();
    }
    let (probs, equal) = gather(subset, h);
    if equal {
        binomial_tail(probs.len(), probs[0], m)
    } else {
        poisson_binomial_tail(&probs, m)
    }
}

/// `tails[r] = Pr(count >= r)` for `r = 0..=|S|+1`.
pub(crate) fn subset_tails<T: Real>(subset: &[usize], h: &[T]) -> Vec<T> {
    let (probs, equal) = gather(subset, h);
    let pmf = if equal && !probs.is_empty() {
        binomial_pmf(probs.len(), probs[0])
    } else {
        poisson_binomial_pmf(&probs)
    };
    tails_from_pmf(&pmf)
}

pub(crate) fn tails_from_pmf<T: Real>(pmf: &[T]) -> Vec<T> {
    let mut tails = vec![T::zero(); pmf.len() + 1];
    for r in (0..pmf.len()).rev() {
        tails[r] = tails[r + 1] + pmf[r];
    }
    tails[0] = T::one();
    tails.iter_mut().for_each(|t| *t = t.min(T::one()));
    tails
}

fn table_expectation<T: Real>(table: &[bool], h: &[T]) -> T {
    let mut total = T::zero();
    for (mask, &hit) in table.iter().enumerate() {
        if !hit {
            continue;
        }
        let mut p = T::one();
        for (i, &hi) in h.iter().enumerate() {
            p = p * if mask >> i & 1 == 1 { hi } else { T::one() - hi };
        }
        total = total + p;
    }
    total.min(T::one())
}

/// `P(h)` for a validated policy, evaluating general weights exactly.
pub fn p_policy<T: Real>(policy: &Policy<T>, h: &PPoint<T>, q: T) -> Result<T> {
    Ok(PEvaluator::new(policy, q, WeightedMode::Exact)?.eval(h.values())?.upper)
}

/// Tabulates the counting function of a policy with `n <= 20` samples.
pub fn tabulate<T: Real>(policy: &Policy<T>, q: T) -> Result<Vec<bool>> {
    let n = policy.n();
    if n > crate::model::MAX_TABULATED_N {
        return Err(Error::invalid("n", "tabulation is limited to n <= 20"));
    }
    let eval = PEvaluator::new(policy, q, WeightedMode::Exact)?;
    (0..1usize << n)
        .map(|mask| {
            let h: Vec<T> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { T::one() } else { T::zero() })
                .collect();
            Ok(eval.eval(&h)?.upper > T::lit(0.5))
        })
        .collect()
}

/// Nadaraya-Watson kernels turning dissimilarities into weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel<T> {
    Gaussian { bandwidth: T },
    Triangular { bandwidth: T },
}

/// `w_i = K(d_i)`.
pub fn kernel_weights<T: Real>(d: &[T], kernel: Kernel<T>) -> Result<Vec<T>> {
    let bandwidth = match kernel {
        Kernel::Gaussian { bandwidth } | Kernel::Triangular { bandwidth } => bandwidth,
    };
    if !(bandwidth > T::zero()) {
        return Err(Error::invalid(
            "bandwidth",
            format!("must be positive, got {bandwidth}"),
        ));
    }
    let half = T::lit(0.5);
    Ok(d.iter()
        .map(|&di| {
            let u = di / bandwidth;
            match kernel {
                Kernel::Gaussian { .. } => (-half * u * u).exp(),
                Kernel::Triangular { .. } => (T::one() - u.abs()).max(T::zero()),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MixtureEntry;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn counting_werm_examples() {
        assert!(counting_werm(&[2.0f64, 1.0, 1.0, 1.0], 0.5, &[true, true, false, false]).unwrap());
        assert!(!counting_werm(&[1.0f64], 0.5, &[false]).unwrap());
        assert!(!counting_werm(&[1.0f64; 4], 0.9, &[true, true, true, false]).unwrap());
        assert!(counting_werm(&[0.0f64, 0.0], 0.5, &[true, true]).is_err());
    }

    #[test]
    fn action_werm_examples() {
        let w = [2.0f64, 1.0, 1.0, 1.0];
        assert_eq!(action_werm(&w, 0.5, &[0.1, 0.2, 0.3, 0.4]).unwrap(), 0.2);
        assert_eq!(action_werm(&w, 0.5, &[0.3, 0.2, 0.1, 0.4]).unwrap(), 0.3);
        assert_eq!(action_werm(&[1.0f64; 4], 0.9, &[0.1, 0.2, 0.3, 0.4]).unwrap(), 0.4);
        assert!(action_werm(&[1.0f64], 0.5, &[1.5]).is_err());
    }

    #[test]
    fn equality_counts_as_reached() {
        // Half of the weight at 0.2 meets q = 0.5 exactly.
        assert_eq!(action_werm(&[1.0f64, 1.0], 0.5, &[0.2, 0.6]).unwrap(), 0.2);
        assert_eq!(action_werm(&[1.0f64, 1.0], 0.5, &[0.0, 0.6]).unwrap(), 0.0);
    }

    #[test]
    fn order_statistic_examples() {
        let y: Vec<f64> = [10.0, 20.0, 30.0, 40.0, 40.0, 50.0].iter().map(|v| v / 100.0).collect();
        assert_eq!(action_order_statistic(&[2, 3, 4, 5], 3, &y), 0.40);
        assert_eq!(action_order_statistic(&[0, 1], 0, &y), 0.0);
        assert_eq!(action_order_statistic(&[0, 1], 3, &[0.7f64, 0.3]), 1.0);
    }

    #[test]
    fn poisson_binomial_examples() {
        assert!(close(poisson_binomial_tail(&[0.5f64, 0.5], 2), 0.25, 1e-15));
        assert!(close(poisson_binomial_tail(&[0.37f64], 1), 0.37, 1e-15));
        assert!(close(poisson_binomial_tail(&[0.1f64, 0.2, 0.3], 1), 0.496, 1e-15));
        assert_eq!(poisson_binomial_tail(&[0.1f64, 0.2], 0), 1.0);
        assert_eq!(poisson_binomial_tail(&[0.1f64, 0.2], 3), 0.0);
    }

    #[test]
    fn poisson_binomial_matches_enumeration() {
        let probs = [0.13f64, 0.5, 0.77, 0.9, 0.02, 0.61];
        let n = probs.len();
        for m in 0..=n + 1 {
            let mut want = 0.0;
            for mask in 0..1usize << n {
                if (mask.count_ones() as usize) < m {
                    continue;
                }
                want += (0..n)
                    .map(|i| if mask >> i & 1 == 1 { probs[i] } else { 1.0 - probs[i] })
                    .product::<f64>();
            }
            assert!(close(poisson_binomial_tail(&probs, m), want, 1e-14), "m = {m}");
        }
    }

    #[test]
    fn binomial_fast_path_matches_dp() {
        for &(n, p) in &[(1usize, 0.3f64), (16, 0.92), (200, 0.87), (2000, 0.5), (5000, 0.999)] {
            let probs = vec![p; n];
            let pmf = binomial_pmf(n, p);
            assert!(close(pmf.iter().sum::<f64>(), 1.0, 1e-12));
            for m in [0, 1, n / 3, n / 2, (n * 9).div_ceil(10), n, n + 1] {
                let dp = poisson_binomial_tail(&probs, m);
                assert!(close(binomial_tail(n, p, m), dp, 1e-12), "n={n} p={p} m={m}");
            }
        }
    }

    #[test]
    fn weighted_tail_examples() {
        assert!(close(
            weighted_threshold_tail(&[1.0f64, 1.0], &[0.5, 0.5], 0.9).unwrap(),
            0.25,
            1e-15
        ));
        assert_eq!(
            weighted_threshold_tail(&[2.0f64, 1.0, 1.0, 1.0], &[1.0, 0.0, 0.0, 0.0], 0.5).unwrap(),
            0.0
        );
        let probs = [0.2f64, 0.9, 0.45, 0.6, 0.33];
        for q in [0.1f64, 0.4, 0.5, 0.6, 0.8, 0.9] {
            let m = ceil_tol(q * 5.0);
            let a = weighted_threshold_tail(&[1.0f64; 5], &probs, q).unwrap();
            assert!(close(a, poisson_binomial_tail(&probs, m), 1e-14), "q={q}");
        }
    }

    #[test]
    fn quantized_bracket_contains_exact() {
        let w: Vec<f64> = (1..=14).map(|i| 0.9f64.powi(i)).collect();
        let probs: Vec<f64> = (0..14).map(|i| 0.05 + 0.06 * i as f64).collect();
        let exact = weighted_threshold_tail(&w, &probs, 0.9).unwrap();
        let b = weighted_threshold_bracket(&w, &probs, 0.9, 1e4).unwrap();
        assert!(b.lower <= exact + 1e-14 && exact <= b.upper + 1e-14, "{b:?} vs {exact}");
        let fine = weighted_threshold_bracket(&w, &probs, 0.9, 1e9).unwrap();
        assert!(fine.width() <= b.width());
    }

    #[test]
    fn p_policy_examples() {
        let single = Policy::new(PolicySpec::WeightedErm { weights: vec![1.0f64] }, 1).unwrap();
        assert!(close(
            p_policy(&single, &PPoint::new(vec![0.3]).unwrap(), 0.5).unwrap(),
            0.3,
            1e-15
        ));
        let zero = Policy::new(
            PolicySpec::OrderStatistic {
                subset: vec![0, 1],
                rank: 0,
            },
            2,
        )
        .unwrap();
        assert_eq!(
            p_policy(&zero, &PPoint::new(vec![0.1, 0.2]).unwrap(), 0.5).unwrap(),
            1.0
        );
    }

    #[test]
    fn tabulated_werm_matches_weighted_tail() {
        let werm = Policy::new(
            PolicySpec::WeightedErm {
                weights: vec![2.0f64, 1.0, 1.0, 1.0],
            },
            4,
        )
        .unwrap();
        let table = tabulate(&werm, 0.5).unwrap();
        let tab = Policy::new(PolicySpec::TabulatedCounting { n: 4, table }, 4).unwrap();
        let h = PPoint::new(vec![0.5f64; 4]).unwrap();
        let direct = weighted_threshold_tail(&[2.0, 1.0, 1.0, 1.0], h.values(), 0.5).unwrap();
        assert!(close(p_policy(&tab, &h, 0.5).unwrap(), direct, 1e-15));
        // Heavy sample plus at least one light one (7 patterns) or all three light ones (1 more).
        assert!(close(direct, 0.5, 1e-15));
    }

    #[test]
    fn mixture_is_convex_combination() {
        let entries = vec![
            MixtureEntry {
                subset: vec![0, 1, 2],
                rank: 1,
                weight: 0.25f64,
            },
            MixtureEntry {
                subset: vec![0, 1, 2],
                rank: 3,
                weight: 0.5,
            },
            MixtureEntry {
                subset: vec![1],
                rank: 1,
                weight: 0.25,
            },
        ];
        let mix = Policy::new(PolicySpec::MixtureOs { entries }, 3).unwrap();
        let h = [0.2f64, 0.7, 0.4];
        let want = 0.25 * poisson_binomial_tail(&h, 1) + 0.5 * poisson_binomial_tail(&h, 3) + 0.25 * 0.7;
        assert!(close(
            p_policy(&mix, &PPoint::new(h.to_vec()).unwrap(), 0.9).unwrap(),
            want,
            1e-15
        ));
    }

    #[test]
    fn mixture_action_selects_by_u() {
        let spec = PolicySpec::prefix_mixture(2, &[0.5f64, 0.0, 0.0, 0.5]);
        let p = Policy::new(spec, 2).unwrap();
        assert_eq!(p.action(0.5, &[0.3, 0.6], 0.2).unwrap(), 0.0);
        assert_eq!(p.action(0.5, &[0.3, 0.6], 0.7).unwrap(), 1.0);
    }

    #[test]
    fn exact_mode_reports_blowup() {
        let w: Vec<f64> = (1..=40).map(|i| 0.97f64.powi(i) + 1e-3 * (i as f64).sqrt()).collect();
        let probs = vec![0.5f64; 40];
        let err = weighted_threshold_tail(&w, &probs, 0.5).unwrap_err();
        assert!(matches!(err, Error::ExactEvaluationInfeasible { .. }));
    }

    #[test]
    fn kernels() {
        let w = kernel_weights(&[0.0f64, 1.0, 3.0], Kernel::Triangular { bandwidth: 2.0 }).unwrap();
        assert_eq!(w, vec![1.0, 0.5, 0.0]);
        let g = kernel_weights(&[0.0f64, 1.0], Kernel::Gaussian { bandwidth: 1.0 }).unwrap();
        assert!(close(g[1], (-0.5f64).exp(), 1e-15));
        assert!(kernel_weights(&[0.0f64], Kernel::Gaussian { bandwidth: 0.0 }).is_err());
    }

    #[test]
    fn works_in_f32() {
        let v = poisson_binomial_tail(&[0.1f32, 0.2, 0.3], 1);
        assert!((v - 0.496).abs() < 1e-6);
        assert_eq!(
            action_werm(&[2.0f32, 1.0, 1.0, 1.0], 0.5, &[0.1, 0.2, 0.3, 0.4]).unwrap(),
            0.2
        );
    }
}
