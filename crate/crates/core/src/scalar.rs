//! Scalar abstraction shared by the numerical kernels.
//!
//! Everything that only does floating-point arithmetic is written against
//! [`Real`], so the same code runs in `f32` or `f64`. The tuning and oracle
//! layers work in `f64` only (see the aliases at the crate root).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the regret engine.
pub trait Real: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count or index.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy conversion used at serialization and reporting boundaries.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance used when comparing sums against thresholds.
    fn threshold_tol() -> Self;
}

impl Real for f32 {
    fn threshold_tol() -> Self {
        1e-6
    }
}

impl Real for f64 {
    fn threshold_tol() -> Self {
        1e-12
    }
}

/// Natural log of the gamma function, evaluated in double precision.
pub(crate) fn ln_gamma<T: Real>(x: T) -> T {
    T::lit(libm::lgamma(x.as_f64()))
}

/// `ln C(n, k)`.
pub(crate) fn ln_choose<T: Real>(n: usize, k: usize) -> T {
    debug_assert!(k <= n);
    let one = T::one();
    ln_gamma(T::from_count(n) + one) - ln_gamma(T::from_count(k) + one) - ln_gamma(T::from_count(n - k) + one)
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf<T: Real>(x: T) -> T {
    let x = x.as_f64();
    T::lit(0.5 * libm::erfc(-x / std::f64::consts::SQRT_2))
}

/// Smallest integer `m` with `m >= q * n`, treating values within the
/// threshold tolerance of an integer as that integer.
pub(crate) fn ceil_tol<T: Real>(x: T) -> usize {
    let tol = T::threshold_tol() * x.abs().max(T::one());
    let c = (x - tol).ceil();
    if c <= T::zero() {
        0
    } else {
        c.to_usize().unwrap_or(usize::MAX)
    }
}
