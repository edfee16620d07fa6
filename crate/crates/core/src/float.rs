//! Scalar abstraction for the numeric parts of the crate.
//!
//! Controller arithmetic, the forecaster and the metric formulas are written
//! against [`Real`] so they run in `f32` or `f64`. The simulator and the
//! scenario types are concrete `f64`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub trait Real:
    'static
    + Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + Send
    + Sync
{
    /// Converts an `f64` constant; infallible for the supported scalars.
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
        self.to_f64().expect("scalar to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
