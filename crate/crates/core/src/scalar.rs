use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real-valued scalar used for volumes, probabilities, rates and frame geometry.
///
/// Timestamps and durations stay integral; everything continuous goes through
/// this trait so the pipeline can run in `f32` (embedded feeders, compact logs)
/// or `f64` (the service default).
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` literal or config value.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to every Scalar")
    }

    /// Integer counts and millisecond durations.
    fn of_u64(v: u64) -> Self {
        Self::from_u64(v).expect("u64 converts to every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip_small_integers() {
        assert_eq!(f32::of_u64(60_000), 60_000.0);
        assert_eq!(f64::of(0.15).as_f64(), 0.15);
        assert!((f32::of(0.15).as_f64() - 0.15).abs() < 1e-7);
    }
}
