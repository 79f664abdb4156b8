//! Scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the simulation core is generic over.
///
/// Implemented for `f32` and `f64`. Everything physical in the crate is
/// written against this trait; the scenario engine pins it to `f64`.
pub trait Scalar:
    Float
    + FloatConst
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
    /// Relative machine epsilon used for "exact to rounding" comparisons.
    const EPS: Self;

    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self;

    fn from_count(n: usize) -> Self;

    fn as_f64(self) -> f64;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const EPS: Self = <$t>::EPSILON;

            #[inline]
            fn lit(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn from_count(n: usize) -> Self {
                n as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Shorthand for [`Scalar::lit`].
#[inline]
pub fn c<T: Scalar>(v: f64) -> T {
    T::lit(v)
}

/// Gauss–Legendre nodes and weights on [-1, 1], 8 points.
pub(crate) const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// Composite 8-point Gauss–Legendre over `[a, b]` with `panels` equal panels.
pub(crate) fn integrate<T: Scalar>(a: T, b: T, panels: usize, f: impl Fn(T) -> T) -> T {
    if panels == 0 || a == b {
        return T::zero();
    }
    let width = (b - a) / T::from_count(panels);
    let half = width * c(0.5);
    let mut sum = T::zero();
    for k in 0..panels {
        let mid = a + width * T::from_count(k) + half;
        for &(x, w) in GL8.iter() {
            sum = sum + c::<T>(w) * f(mid + half * c(x));
        }
    }
    sum * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        // degree 15 is the limit for 8 points
        let v: f64 = integrate(0.0, 2.0, 1, |x| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        let w: f32 = integrate(-1.0f32, 1.0, 3, |x| x * x);
        assert!((w - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn gauss_weights_sum_to_two() {
        let s: f64 = GL8.iter().map(|&(_, w)| w).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }
}
