//! Scalar abstraction shared by every module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the library computes in. Implemented for `f32` and `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal or parameter into the scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count into the scalar type.
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
}

/// `s^{-k}` computed by repeated division so that exact powers of two stay exact.
pub fn inv_pow<T: Real>(s: T, k: u32) -> T {
    let mut x = T::one();
    for _ in 0..k {
        x /= s;
    }
    x
}
