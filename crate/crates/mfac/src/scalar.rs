//! Generic scalar abstraction for the numerical core.
//!
//! Everything in this crate is written against [`Scalar`] so the same code
//! runs in `f32` or `f64`. The benchmarks and the CLI use `f64`.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps, ToPrimitive};
use rand::distributions::uniform::SampleUniform;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{de::DeserializeOwned, Serialize};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + SampleUniform
    + Sum<Self>
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Draw a standard normal sample.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f32 {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Scalar for f64 {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

/// Convert an `f64` literal to the working scalar type.
///
/// Panics only if the target type cannot represent any `f64`, which cannot
/// happen for the shipped impls.
#[inline]
pub fn real<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal must convert to scalar type")
}

/// Euclidean norm of a slice.
pub fn norm2<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Euclidean distance between two slices of equal length.
pub fn dist2<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}
