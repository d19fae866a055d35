//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
///
/// All propagator machinery is written against this trait. The concrete
/// aliases at the crate root fix it to `f64`, which is what the
/// tolerances quoted throughout the tests assume.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Lossy for `f32`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::lit(0.5)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    fn generic_half<T: Real>() -> T {
        T::two().recip()
    }

    #[test]
    fn literals_round_trip() {
        assert_eq!(f64::lit(0.25), 0.25);
        assert_eq!(f32::lit(0.25), 0.25f32);
        assert_eq!(generic_half::<f64>(), f64::half());
        assert_eq!(f32::from_usize_lossy(7), 7.0);
    }
}
