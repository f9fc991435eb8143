//! Floating point scalar abstraction shared by the geometric and learning code.

use std::fmt::{Debug, Display};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumCast
    + num_traits::NumAssign
    + std::iter::Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; exact for `f64`.
    #[inline]
    fn of(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("f64 is representable")
    }

    #[inline]
    fn to_f64_lossless(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("float widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
