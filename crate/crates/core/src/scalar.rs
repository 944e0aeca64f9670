//! Scalar abstraction shared by every numeric module.
//!
//! All signal-processing and analysis code is written against [`Real`], so
//! the same pipeline runs in `f32` (fast sweeps) or `f64` (reference runs).
//! Timing relations that must hold exactly are additionally available over
//! any [`num_traits::Num`] type, which admits exact rationals.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating point scalar usable throughout the sounder.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    /// Widens to `f64`, used at I/O boundaries.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Power ratio in dB to linear.
#[inline]
pub fn db_to_power<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// Linear power ratio to dB. Zero maps to negative infinity.
#[inline]
pub fn power_to_db<T: Real>(p: T) -> T {
    T::lit(10.0) * p.log10()
}

/// Amplitude scale corresponding to a power gain in dB.
#[inline]
pub fn db_to_amplitude<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(20.0))
}

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Thermal noise power spectral density at 290 K, dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_conversions_invert() {
        for db in [-120.0_f64, -3.0, 0.0, 6.02, 39.03] {
            let back = power_to_db(db_to_power(db));
            assert!((back - db).abs() < 1e-12);
            assert!((db_to_amplitude(db).powi(2) - db_to_power(db)).abs() < 1e-9 * db_to_power(db));
        }
        assert_eq!(power_to_db(0.0_f64), f64::NEG_INFINITY);
    }

    #[test]
    fn f32_lit_roundtrips() {
        assert_eq!(<f32 as Real>::lit(0.5), 0.5_f32);
        assert_eq!(Real::as_f64(2.0_f32), 2.0);
    }
}
