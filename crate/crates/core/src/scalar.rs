//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

/// Floating-point scalar the geometry and optimizer are generic over.
///
/// Implemented for `f32` and `f64`. Numeric tolerances inside the crate are
/// expressed relative to [`Real::tolerance`] so that single precision keeps
/// working, just with looser bounds.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// A small relative tolerance used for "effectively zero" checks.
    fn tolerance() -> Self;
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    #[inline]
    fn tolerance() -> Self {
        1e-12
    }
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn tolerance() -> Self {
        1e-6
    }
}

/// Total order over scalars for sorting and heaps; NaN compares equal.
#[inline]
pub(crate) fn cmp<T: Real>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
}
