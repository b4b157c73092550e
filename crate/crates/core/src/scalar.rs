//! Scalar abstraction shared by every numerical module.
//!
//! All operators, norms and functionals are generic over [`Real`], which is
//! implemented for `f32` and `f64`. Parameters such as Lebesgue exponents stay
//! `f64`; only field values and spectral data carry the generic scalar.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable by the toolkit.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + serde::Serialize {
    /// Tolerance for quantities that are exact up to accumulated rounding
    /// (orthonormality, kernel detection, conservation identities).
    const TOL: f64;

    /// Converts an `f64` literal or parameter into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.to_f64_lossy().is_finite()
    }
}

impl Real for f32 {
    const TOL: f64 = 1e-4;
}

impl Real for f64 {
    const TOL: f64 = 1e-10;
}

/// Pairwise (tree) summation. The result is independent of how the input was
/// produced, so parallel producers that collect in order stay bit-reproducible.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    match values.len() {
        0 => T::zero(),
        1 => values[0],
        2 => values[0] + values[1],
        len => {
            let mid = len / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Pairwise summation of equally sized vectors.
pub fn pairwise_sum_vectors<T: Real>(
    items: &[nalgebra::DVector<T>],
    len: usize,
) -> nalgebra::DVector<T> {
    match items.len() {
        0 => nalgebra::DVector::zeros(len),
        1 => items[0].clone(),
        n => {
            let mid = n / 2;
            pairwise_sum_vectors(&items[..mid], len) + pairwise_sum_vectors(&items[mid..], len)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lit_round_trips() {
        assert_eq!(f64::lit(0.25), 0.25);
        assert_eq!(f32::lit(0.25), 0.25f32);
    }

    #[test]
    fn pairwise_matches_naive_on_exact_values() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 5050.0);
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
    }
}
