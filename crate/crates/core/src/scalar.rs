use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar the numeric core is written against: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    /// `max(tol, k * epsilon)`: clamps a requested tolerance to something the type can resolve.
    fn resolvable(tol: f64, k: f64) -> Self {
        Self::lit(tol).max(Self::epsilon() * Self::lit(k))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
