//! Linear value approximators over fixed feature bases.

use super::{check_dim, GradientVector, Parametric, ValueApproximator};
use crate::error::Result;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Fixed feature map `φ : state → ℝⁿ`.
///
/// The shipped bases have full column rank over any set of ≥ n distinct
/// sample states (Vandermonde for the 1D polynomial basis).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// `(1, x, x², …, x^degree)` on scalar states.
    Polynomial1D { degree: usize },
    /// `(1, x₁, x₂, x₁², x₁x₂, x₂²)` on 2-d states.
    Quadratic2D,
}

impl Basis {
    pub fn input_dim(&self) -> usize {
        match self {
            Basis::Polynomial1D { .. } => 1,
            Basis::Quadratic2D => 2,
        }
    }

    pub fn feature_count(&self) -> usize {
        match self {
            Basis::Polynomial1D { degree } => degree + 1,
            Basis::Quadratic2D => 6,
        }
    }

    pub fn features<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        match self {
            Basis::Polynomial1D { degree } => {
                let mut out = Vec::with_capacity(degree + 1);
                let mut p = T::one();
                for _ in 0..=*degree {
                    out.push(p);
                    p = p * x[0];
                }
                out
            }
            Basis::Quadratic2D => {
                let (a, b) = (x[0], x[1]);
                vec![T::one(), a, b, a * a, a * b, b * b]
            }
        }
    }
}

/// `V_θ(x) = φ(x)ᵀ θ` with a fixed basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearCritic<T> {
    basis: Basis,
    coefficients: Vec<T>,
}

impl<T: Scalar> LinearCritic<T> {
    pub fn zeros(basis: Basis) -> Self {
        Self {
            basis,
            coefficients: vec![T::zero(); basis.feature_count()],
        }
    }

    pub fn with_coefficients(basis: Basis, coefficients: Vec<T>) -> Self {
        assert_eq!(coefficients.len(), basis.feature_count());
        Self { basis, coefficients }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }
}

impl<T: Scalar> Parametric<T> for LinearCritic<T> {
    fn param_count(&self) -> usize {
        self.coefficients.len()
    }

    fn flatten_into(&self, out: &mut Vec<T>) {
        out.extend_from_slice(&self.coefficients);
    }

    fn unflatten_from(&mut self, flat: &[T]) -> Result<()> {
        check_dim(self.coefficients.len(), flat, "linear critic unflatten")?;
        self.coefficients.copy_from_slice(flat);
        Ok(())
    }
}

impl<T: Scalar> ValueApproximator<T> for LinearCritic<T> {
    fn input_dim(&self) -> usize {
        self.basis.input_dim()
    }

    fn value(&self, x: &[T]) -> T {
        let phi = self.basis.features(x);
        phi.iter().zip(&self.coefficients).map(|(&f, &c)| f * c).sum()
    }

    /// The gradient of a linear model is the feature vector itself.
    fn value_gradient(&self, x: &[T]) -> GradientVector<T> {
        GradientVector::new(self.basis.features(x))
    }
}
