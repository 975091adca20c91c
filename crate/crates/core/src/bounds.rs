//! Reference quantities: the no-data regret, the universal lower bound and a
//! general-purpose concentration upper bound on the regret of ERM.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{ln_choose, normal_cdf, Real};

/// Minimax regret with support knowledge only, `q (1 - q)`.
pub fn no_data_regret<T: Real>(q: T) -> T {
    q * (T::one() - q)
}

/// No policy can beat `zeta / 2` when every dissimilarity equals `zeta`.
pub fn universal_lower_bound<T: Real>(zeta: T) -> T {
    zeta / T::lit(2.0)
}

/// Which displayed form of the bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundVariant {
    /// `4 C_n + 2 M mean(d) + 4 ∫_0^1 exp(-eta^2 n / (2 M^2)) d eta`.
    MainTextForm,
    /// `4 C_n + 2 M mean(d) + M sqrt(pi / 2n) (Phi(M / sqrt(4n)) - Phi(0))`.
    AppendixPhiForm,
}

/// Whether the Rademacher complexity is divided by `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Normalization {
    PerSample,
    Unnormalized,
}

/// Loss slope multiplying `E[(sum sigma_i)^+]` in the complexity term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ComplexityScale {
    /// `c_o`: the loss `c_o a` of outcome 0, literally.
    Overage,
    /// `max(c_o, c_u)`, the Lipschitz constant of the loss.
    MaxCost,
}

/// Settings of [`mohri_expected_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConfig<T> {
    pub variant: BoundVariant,
    pub normalization: Normalization,
    pub scale: ComplexityScale,
    pub n: usize,
    pub q: T,
    pub mean_dissimilarity: T,
}

impl<T: Real> BoundConfig<T> {
    /// Defaults that reproduce the published sample counts: Φ form, per-sample
    /// normalization, Lipschitz scale.
    pub fn new(n: usize, q: T, mean_dissimilarity: T) -> Self {
        Self {
            variant: BoundVariant::AppendixPhiForm,
            normalization: Normalization::PerSample,
            scale: ComplexityScale::MaxCost,
            n,
            q,
            mean_dissimilarity,
        }
    }
}

/// Rademacher complexity value and whether the Gaussian asymptotic was used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Complexity<T> {
    pub value: T,
    pub asymptotic: bool,
}

/// Above this many samples `E[(S_n)^+]` switches to `sqrt(n / 2 pi)`.
pub const EXACT_COMPLEXITY_MAX_N: usize = 1_000_000;

/// `E[(sigma_1 + ... + sigma_n)^+]` for Rademacher signs.
///
/// Uses `E|S_n| = n C(n-1, floor((n-1)/2)) / 2^(n-1)` and the symmetry of `S_n`.
pub fn rademacher_positive_part<T: Real>(n: usize) -> Complexity<T> {
    if n > EXACT_COMPLEXITY_MAX_N {
        return Complexity {
            value: (T::from_count(n) / (T::lit(2.0) * T::lit(std::f64::consts::PI))).sqrt(),
            asymptotic: true,
        };
    }
    let m = (n - 1) / 2;
    let log_abs = T::from_count(n).ln() + ln_choose::<T>(n - 1, m) - T::from_count(n - 1) * T::lit(2f64.ln());
    Complexity {
        value: log_abs.exp() / T::lit(2.0),
        asymptotic: false,
    }
}

/// Complexity for Bernoulli(0) samples, `c_o E[(sum sigma_i)^+]`, optionally divided by `n`.
pub fn rademacher_cn<T: Real>(n: usize, q: T, normalization: Normalization) -> Result<Complexity<T>> {
    complexity(n, q, normalization, ComplexityScale::Overage)
}

fn complexity<T: Real>(n: usize, q: T, normalization: Normalization, scale: ComplexityScale) -> Result<Complexity<T>> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if !(q > T::zero() && q < T::one()) {
        return Err(Error::invalid("q", format!("must lie in (0, 1), got {q}")));
    }
    let coef = match scale {
        ComplexityScale::Overage => T::one() - q,
        ComplexityScale::MaxCost => q.max(T::one() - q),
    };
    let e = rademacher_positive_part::<T>(n);
    let div = match normalization {
        Normalization::PerSample => T::from_count(n),
        Normalization::Unnormalized => T::one(),
    };
    Ok(Complexity {
        value: coef * e.value / div,
        asymptotic: e.asymptotic,
    })
}

/// Upper bound on the expected regret of ERM implied by a general-purpose
/// concentration inequality for non-identically distributed samples.
pub fn mohri_expected_bound<T: Real>(cfg: &BoundConfig<T>) -> Result<T> {
    if !(cfg.mean_dissimilarity >= T::zero()) {
        return Err(Error::invalid("mean_dissimilarity", "must be non-negative"));
    }
    let cn = complexity(cfg.n, cfg.q, cfg.normalization, cfg.scale)?.value;
    let m = cfg.q.max(T::one() - cfg.q);
    let n = T::from_count(cfg.n);
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let pi = T::lit(std::f64::consts::PI);
    let beta = T::lit(4.0) * cn + two * m * cfg.mean_dissimilarity;
    let tail = match cfg.variant {
        BoundVariant::AppendixPhiForm => {
            m * (pi / (two * n)).sqrt() * (normal_cdf(m / (T::lit(4.0) * n).sqrt()) - half)
        }
        BoundVariant::MainTextForm => {
            // Gaussian integral with standard deviation s = M / sqrt(n), truncated at 1.
            let s = m / n.sqrt();
            T::lit(4.0) * s * (two * pi).sqrt() * (normal_cdf(T::one() / s) - half)
        }
    };
    Ok(beta + tail)
}

/// Value of the bound as `n` grows without limit.
pub fn mohri_limit<T: Real>(cfg: &BoundConfig<T>) -> T {
    let m = cfg.q.max(T::one() - cfg.q);
    let cn_limit = match cfg.normalization {
        Normalization::PerSample => T::zero(),
        Normalization::Unnormalized => T::infinity(),
    };
    T::lit(4.0) * cn_limit + T::lit(2.0) * m * cfg.mean_dissimilarity
}

/// Smallest `n` at which the bound (with constant dissimilarity `zeta`) falls
/// to `f q (1 - q)`, for each fraction `f`; `None` when the limit exceeds the target.
pub fn bound_sample_complexity<T: Real>(
    template: &BoundConfig<T>,
    zeta: T,
    targets: &[T],
    n_max: usize,
) -> Result<Vec<(T, Option<usize>)>> {
    let cfg_at = |n: usize| BoundConfig {
        n,
        mean_dissimilarity: zeta,
        ..*template
    };
    let nd = no_data_regret(template.q);
    targets
        .iter()
        .map(|&f| {
            if !(f > T::zero() && f <= T::one()) {
                return Err(Error::invalid("target", format!("must lie in (0, 1], got {f}")));
            }
            let goal = f * nd;
            if mohri_limit(&cfg_at(1)) >= goal {
                return Ok((f, None));
            }
            let below = |n: usize| -> Result<bool> { Ok(mohri_expected_bound(&cfg_at(n))? <= goal) };
            // The Φ form is non-increasing in n, so bracket and bisect.
            let mut hi = 1;
            while !below(hi)? {
                if hi >= n_max {
                    return Err(Error::TargetNotReached {
                        target: f.as_f64(),
                        n_max,
                    });
                }
                hi = (hi * 2).min(n_max);
            }
            let mut lo = hi / 2 + 1;
            if hi == 1 {
                lo = 1;
            }
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if below(mid)? {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            Ok((f, Some(lo)))
        })
        .collect()
}
