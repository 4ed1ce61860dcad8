//! Scalar abstraction for the signal path.
//!
//! Everything that carries light levels, filter states or correlation
//! coefficients is generic over [`Scalar`], so the same model runs in `f32`
//! (cheap sweeps) or `f64` (the default used by the experiment harness).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type usable by the simulator: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    /// Conversion to `f64`, for reporting and RNG plumbing.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl<T> Scalar for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
}

/// Converts a µs count into the scalar type.
pub(crate) fn us<T: Scalar>(v: u64) -> T {
    T::from_u64(v).expect("µs count representable in scalar type")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lit_round_trips_for_both_widths() {
        assert_eq!(f64::lit(0.25), 0.25);
        assert_eq!(f32::lit(0.25), 0.25f32);
        assert_eq!(0.5f32.as_f64(), 0.5);
        assert_eq!(us::<f32>(100), 100.0);
    }
}
