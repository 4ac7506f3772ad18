//! Numeric abstraction for metric arithmetic.
//!
//! Metrics are ratios of counts, so they can be evaluated in floating point
//! or exactly. Aggregation uses the exact form so that half-up rounding to
//! two decimals never depends on float representation error.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, ToPrimitive};

/// Scalar type usable by every metric: `f32`, `f64` or [`BigRational`].
pub trait Scalar: Num + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive {
    /// `numerator / denominator` computed in this scalar type.
    fn ratio(numerator: usize, denominator: usize) -> Self {
        Self::from_usize(numerator).expect("count fits scalar")
            / Self::from_usize(denominator).expect("count fits scalar")
    }

    /// Rounds `self` half-up to two decimal places and returns it as `f64`.
    fn round_2dp(&self) -> f64;
}

impl Scalar for f32 {
    fn round_2dp(&self) -> f64 {
        f64::from(*self).round_2dp()
    }
}

impl Scalar for f64 {
    fn round_2dp(&self) -> f64 {
        (self * 100.0 + 0.5).floor() / 100.0
    }
}

impl Scalar for BigRational {
    fn round_2dp(&self) -> f64 {
        let hundred = BigRational::from_integer(BigInt::from(100));
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let cents = (self * &hundred + half).floor().to_integer();
        cents.to_f64().expect("finite") / 100.0
    }
}

/// Arithmetic mean; zero for an empty input.
pub fn mean<T: Scalar>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let sum = values.iter().cloned().fold(T::zero(), |a, b| a + b);
    sum / T::from_usize(values.len()).expect("length fits scalar")
}

/// `mean × 100`, rounded half-up to two decimals.
pub fn percent_2dp<T: Scalar>(values: &[T]) -> f64 {
    let hundred = T::from_u32(100).expect("100 fits scalar");
    (mean(values) * hundred).round_2dp()
}

/// True when `0 ≤ v ≤ 1`.
pub fn is_unit_interval<T: Scalar>(v: &T) -> bool {
    *v >= T::zero() && *v <= T::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn exact_half_rounds_up() {
        // 0.872_75 exactly; binary floats cannot represent it.
        assert_eq!(q(87275, 1000).round_2dp(), 87.28);
        assert_eq!(q(87274, 1000).round_2dp(), 87.27);
        assert_eq!(q(2, 3).round_2dp(), 0.67);
    }

    #[test]
    fn percent_of_ratios() {
        let v = vec![BigRational::ratio(2, 3), BigRational::ratio(1, 1), BigRational::ratio(0, 1)];
        assert_eq!(percent_2dp(&v), 55.56);
        let f: Vec<f64> = vec![2.0 / 3.0, 1.0, 0.0];
        assert_eq!(percent_2dp(&f), 55.56);
    }

    #[test]
    fn empty_mean_is_zero() {
        let v: Vec<BigRational> = vec![];
        assert!(mean(&v).is_zero());
    }
}
