//! Scalar abstraction shared by every numerical module.
//!
//! All estimation code is written against [`Scalar`] so the same routines run
//! in `f64` (the default used by the pipeline) or `f32`.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or statistic.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn machine_epsilon() -> Self {
        Self::default_epsilon()
    }

    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Scalar for f64 {}
impl Scalar for f32 {}
