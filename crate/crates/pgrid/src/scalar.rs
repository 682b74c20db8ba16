//! Scalar abstraction for the numeric core.
//!
//! Raster math (losses, resampling, watershed topography, the scorer) is
//! generic over [`Real`] so the same code runs in f32 or f64. The pipeline
//! instantiates f64 throughout: gradient verification against central finite
//! differences needs the headroom. f32 remains available for bulk storage and
//! interchange (the raster container stores float32 payloads).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the numeric core: f32 or f64.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lift an f64 literal into this scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in Real scalar")
    }

    /// Lossy view as f64 (exact for f32 and f64).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
