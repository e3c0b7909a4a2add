//! Differentiable function approximators with hand-derived gradients.
//!
//! Three parameter containers live here: [`Mlp`] (feed-forward networks with
//! tanh hidden layers), [`LinearCritic`] (fixed basis, linear coefficients)
//! and [`GaussianPolicy`] (diagonal Gaussian over actions with a shared tanh
//! trunk and separate mean/std heads). All training is plain SGD; there is no
//! autodiff anywhere, every gradient is written out by hand and checked
//! against central finite differences in the test suite.
//!
//! Parameters flatten to a canonical order: layer-major, weights row-major
//! before biases within each layer. For the policy the trunk comes first,
//! then the mean head, then the std head.

mod linear;
mod mlp;
mod policy;

pub use linear::{Basis, LinearCritic};
pub use mlp::{Activation, EvalScratch, Mlp};
pub use policy::{GaussianPolicy, PolicyArch};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// A flat gradient aligned with a parameter container's canonical
/// flattening order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> GradientVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![T::zero(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// In-place `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        debug_assert_eq!(self.len(), other.len());
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn norm(&self) -> T {
        crate::scalar::norm2(&self.values)
    }
}

/// A parameter container that can flatten to and from a single vector and
/// take plain SGD steps.
pub trait Parametric<T: Scalar> {
    /// Total number of scalar parameters.
    fn param_count(&self) -> usize;

    /// Copy all parameters into `out` in canonical order.
    fn flatten_into(&self, out: &mut Vec<T>);

    /// Overwrite all parameters from a flat slice in canonical order.
    fn unflatten_from(&mut self, flat: &[T]) -> Result<()>;

    fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        self.flatten_into(&mut out);
        out
    }

    /// `params <- params - rate * grad`.
    ///
    /// A non-finite gradient is a training error and is surfaced to the
    /// caller rather than silently corrupting the parameters.
    fn sgd_step(&mut self, grad: &GradientVector<T>, rate: T) -> Result<()> {
        if grad.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: grad.len(),
                context: "sgd_step gradient length",
            });
        }
        if !grad.is_finite() {
            return Err(Error::NonFiniteGradient { step: 0 });
        }
        let mut flat = self.flatten();
        for (p, &g) in flat.iter_mut().zip(grad.as_slice()) {
            *p = *p - rate * g;
        }
        self.unflatten_from(&flat)
    }
}

/// A state-value approximator `V(x)`.
pub trait ValueApproximator<T: Scalar>: Parametric<T> {
    fn input_dim(&self) -> usize;

    /// `V(x)`; deterministic for fixed parameters and input.
    fn value(&self, x: &[T]) -> T;

    /// `∇_θ V(x)` in canonical flattening order.
    fn value_gradient(&self, x: &[T]) -> GradientVector<T>;

    /// `V(x)` with caller-provided scratch; hot-loop variant.
    fn value_buffered(&self, x: &[T], _scratch: &mut EvalScratch<T>) -> T {
        self.value(x)
    }
}

pub(crate) fn check_dim<T>(expected: usize, x: &[T], context: &'static str) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
            context,
        });
    }
    Ok(())
}
