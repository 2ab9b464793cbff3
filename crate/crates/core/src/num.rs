//! Scalar abstraction for the signal-processing path.
//!
//! The DSP code (FFT, mel maps, filterbank, DCT, framing) is written once
//! against [`Real`] and instantiated for `f32` and `f64`. Classifiers and
//! on-disk formats work in `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable throughout the feature pipeline.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; constants in the pipeline are all representable.
    #[inline]
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 constant representable in scalar type")
    }

    #[inline]
    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
