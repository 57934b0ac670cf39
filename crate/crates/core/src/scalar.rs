//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra as na;
use num_traits as nt;

/// Floating-point scalar usable by the geometry, estimation and solver code.
///
/// Implemented for `f32` and `f64`. The default tolerances in this crate are
/// tuned for `f64`; with `f32` they should be loosened through the various
/// `*Tolerances` structs.
pub trait Real: na::RealField + Copy + nt::FromPrimitive + nt::ToPrimitive + Debug + Display + Default {
    /// Convert an `f64` literal. Never fails for finite input.
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("finite literal")
    }

    fn to_f64_lossy(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the concrete type.
    fn eps() -> Self;
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
}

pub(crate) fn max_abs<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    xs.into_iter().fold(T::zero(), |m, x| m.max(x.abs()))
}
