//! Scalar abstraction shared by every numerical module.
//!
//! All moment propagation, closed forms and the optimizer are written against
//! [`Real`], so the same code runs in `f64` (the default, used by the CLI) or
//! in `f32` for quick low-precision scans.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Absolute tolerance for structural identities (symmetry, symplecticity, physicality slack).
    fn structural_tolerance() -> Self;
}

impl Real for f64 {
    fn structural_tolerance() -> Self {
        1e-12
    }
}

impl Real for f32 {
    fn structural_tolerance() -> Self {
        1e-5
    }
}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a count into the working scalar.
#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}
