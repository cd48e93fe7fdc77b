//! Scalar abstraction shared by the geometric, kinematic and reward code.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the core math is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Every `Real` can represent (a rounding of) any finite `f64`.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two_pi() -> Self {
        Self::TAU()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Wraps an angle into `[0, 2π)`.
#[inline]
pub fn wrap_angle<T: Real>(angle: T) -> T {
    let tau = T::two_pi();
    let mut wrapped = angle % tau;
    if wrapped < T::zero() {
        wrapped += tau;
    }
    // `-tiny % tau + tau` rounds to exactly `tau`
    if wrapped >= tau {
        wrapped = T::zero();
    }
    wrapped
}

/// Wraps an angle difference into `(-π, π]`.
#[inline]
pub fn wrap_to_pi<T: Real>(angle: T) -> T {
    let pi = T::PI();
    let mut wrapped = wrap_angle(angle);
    if wrapped > pi {
        wrapped -= T::two_pi();
    }
    wrapped
}
