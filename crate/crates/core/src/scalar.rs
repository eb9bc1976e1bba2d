use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point scalar used throughout the numerical modules.
///
/// Implemented for `f32` and `f64`. The two conversion helpers avoid the
/// `Option` returned by the `num_traits` casting traits, which is never
/// `None` for the finite literals and counts we convert here.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Convert an `f64` literal or count.
    fn of(x: f64) -> Self;

    /// Widen to `f64` (used for reporting and serialization).
    fn as_f64(self) -> f64;

    /// Relative tolerance used to decide that a Cholesky pivot vanished.
    fn rank_tol() -> Self {
        Self::epsilon().sqrt() * Self::of(0.1)
    }
}

impl Scalar for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of(x: f64) -> Self {
        x
    }

    fn as_f64(self) -> f64 {
        self
    }
}

pub(crate) fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm2<F: Scalar>(a: &[F]) -> F {
    dot(a, a).sqrt()
}

pub(crate) fn max_abs<F: Scalar>(a: &[F]) -> F {
    a.iter().fold(F::zero(), |m, &x| m.max(x.abs()))
}
