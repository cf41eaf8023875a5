use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the solvers are generic over. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal; panics only if the target cannot represent finite values.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("scalar conversion from f64")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("scalar conversion from usize")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Infinity norm of `a - b`.
pub fn max_abs_diff<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(F::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

pub fn max_abs<F: Scalar>(a: &[F]) -> F {
    a.iter().fold(F::zero(), |m, &x| m.max(x.abs()))
}

/// `a > b` by more than a relative margin; used for strict-improvement tests
/// where exact ties must not trigger switches.
pub fn strictly_greater<F: Scalar>(a: F, b: F, rtol: F) -> bool {
    a > b + rtol * (F::one() + b.abs())
}
