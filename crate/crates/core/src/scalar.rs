//! Floating point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + FromStr + Send + Sync + 'static
{
    /// Converts an `f64` literal, rounding to the nearest representable value.
    fn lit(value: f64) -> Self;

    /// Widens to `f64`. Exact for both supported types.
    fn to_f64_exact(self) -> f64;

    /// Short tag used in diagnostics and file headers.
    const NAME: &'static str;
}

impl Scalar for f64 {
    #[inline]
    fn lit(value: f64) -> Self {
        value
    }

    #[inline]
    fn to_f64_exact(self) -> f64 {
        self
    }

    const NAME: &'static str = "f64";
}

impl Scalar for f32 {
    #[inline]
    fn lit(value: f64) -> Self {
        value as f32
    }

    #[inline]
    fn to_f64_exact(self) -> f64 {
        self as f64
    }

    const NAME: &'static str = "f32";
}
