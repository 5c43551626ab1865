//! Scalar abstraction shared by every numerical module.
//!
//! All of the physics is written against [`Real`] so that the same code runs
//! in `f64` (the default everywhere) and `f32` (cheap exploratory sweeps).

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable by the simulator. Implemented for `f32` and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + Sum
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    /// Converts a count into `Self`.
    #[inline]
    fn of(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over a [`Real`] scalar.
pub type C<T> = Complex<T>;

/// `e^{i phase}`.
#[inline]
pub fn cis<T: Real>(phase: T) -> C<T> {
    let (s, c) = phase.sin_cos();
    C::new(c, s)
}

/// Wraps a phase into the canonical branch (-π, π]. An input landing exactly
/// on -π maps to +π.
pub fn wrap_phase<T: Real>(phase: T) -> T {
    let pi = T::PI();
    let two_pi = pi + pi;
    let mut r = phase - two_pi * ((phase + pi) / two_pi).floor();
    // floor() above yields [-π, π); fold the lower edge onto +π.
    if r <= -pi {
        r = r + two_pi;
    }
    if r > pi {
        r = r - two_pi;
    }
    r
}

/// Unwraps `next` onto the branch closest to `previous`.
pub fn unwrap_towards<T: Real>(previous: T, next: T) -> T {
    previous + wrap_phase(next - previous)
}
