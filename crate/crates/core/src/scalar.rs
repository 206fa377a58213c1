//! Scalar abstraction shared by every module.
//!
//! All geometry is written against [`Scalar`], which is implemented for `f32`
//! and `f64`. The dyadic helpers here read the binary exponent directly so
//! that powers of two are classified exactly.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar usable for distances, heights and fitted constants.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot hold.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_level(l: i32) -> Self {
        Self::from_i32(l).expect("integer level representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Exact `floor(log2 d)` for a finite positive `d`, and whether `d` is a power of two.
pub fn floor_log2<T: Scalar>(d: T) -> Option<(i32, bool)> {
    if !d.is_finite() || d <= T::zero() {
        return None;
    }
    let (mantissa, exponent, _) = d.integer_decode();
    let bits = 64 - mantissa.leading_zeros() as i32;
    Some((exponent as i32 + bits - 1, mantissa.is_power_of_two()))
}

/// `log2(1/t)`, exact when `t` is a power of two.
pub fn log2_recip<T: Scalar>(t: T) -> T {
    match floor_log2(t) {
        Some((k, true)) => T::from_level(-k),
        _ => -t.log2(),
    }
}

/// `2^v`, exact when `v` is an integer in range.
pub fn pow2<T: Scalar>(v: T) -> T {
    if v.fract() == T::zero() && v.abs() < T::lit(1000.0) {
        let k = v.to_i32().expect("bounded integer");
        T::lit(2.0).powi(k)
    } else {
        v.exp2()
    }
}
