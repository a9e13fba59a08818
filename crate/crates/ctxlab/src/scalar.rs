use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Scalar type the core math is generic over. Implemented for `f32` and
/// `f64`; the shipped pipeline uses `f64`.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Lossy cast from `f64`, used at the boundary between seeded `f64`
/// sampling and generic storage.
#[inline]
pub fn cast<S: Scalar>(v: f64) -> S {
    S::from(v).expect("f64 -> scalar cast")
}

/// Widen to `f64` for statistics that are always accumulated in double
/// precision.
#[inline]
pub fn to_f64<S: Scalar>(v: S) -> f64 {
    v.to_f64().expect("scalar -> f64 cast")
}
