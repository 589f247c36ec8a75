//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Real floating-point scalar: `f32` or `f64`.
///
/// Tolerances throughout the crate are stated for `f64`. The `f32`
/// instantiation works for the block algebra and the entropy formulas but
/// will not meet the tighter thresholds of the dense solvers.
pub trait Real:
    RealField
    + Copy
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn infinity() -> Self {
        Self::lit(f64::INFINITY)
    }

    #[inline]
    fn is_finite_val(self) -> bool {
        self.to_f64_lossy().is_finite()
    }

    #[inline]
    fn total_cmp_val(&self, other: &Self) -> std::cmp::Ordering {
        self.to_f64_lossy().total_cmp(&other.to_f64_lossy())
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over `T`.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn cr<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

/// Numerically stable `ln(sum(exp(x)))`; returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<T: Real>(terms: &[T]) -> T {
    let neg_inf = -T::infinity();
    let mut max = neg_inf;
    for &t in terms {
        if t > max {
            max = t;
        }
    }
    if max == neg_inf {
        return neg_inf;
    }
    if !max.is_finite_val() {
        return max;
    }
    let mut acc = T::zero();
    for &t in terms {
        acc += (t - max).exp();
    }
    max + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let xs = [0.1f64.ln(), 0.2f64.ln(), 0.7f64.ln()];
        assert!((log_sum_exp(&xs) - 0.0).abs() < 1e-15);
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn log_sum_exp_survives_underflow() {
        let xs = [-2000.0f64, -2000.0 + 2f64.ln()];
        let v = log_sum_exp(&xs);
        assert!((v - (-2000.0 + 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn f32_instantiation() {
        let xs = [0.5f32.ln(), 0.5f32.ln()];
        assert!(log_sum_exp(&xs).abs() < 1e-6);
        assert!(<f32 as Real>::infinity() > 1e30);
    }
}
