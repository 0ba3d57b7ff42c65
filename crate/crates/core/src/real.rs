//! Scalar abstraction: the solvers are generic over the floating point type.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar (f32 or f64) with the transcendental functions and
/// conversions the solvers need.
pub trait Real:
    Float + FloatConst + FromPrimitive + AddAssign + Sum + Default + Debug + Display + 'static
{
    /// Convert an f64 literal into the scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal conversion")
    }

    #[inline]
    fn half() -> Self {
        Self::of(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::of(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}
