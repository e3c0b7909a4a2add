//! Closed-form solutions of the linear-quadratic benchmarks, used as ground
//! truth by the error metrics and the acceptance checks.

mod one_d;
mod two_d;

pub use one_d::{solve_mfc_1d, solve_mfcg_1d, solve_mfg_1d};
pub use two_d::solve_lq_2d;

use crate::linalg::{Mat2, Vec2};
use crate::scalar::{real, Scalar};
use serde::{Deserialize, Serialize};

/// Which problem a solution solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemTag {
    Mfg,
    Mfc,
    Mfcg,
}

impl std::fmt::Display for ProblemTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProblemTag::Mfg => write!(f, "mfg"),
            ProblemTag::Mfc => write!(f, "mfc"),
            ProblemTag::Mfcg => write!(f, "mfcg"),
        }
    }
}

/// Scalar solution: value function `v(x) = Γ₂x² + Γ₁x + Γ₀`, optimal control
/// `α(x) = −(2Γ₂x + Γ₁)` and limiting law `N(mean, variance)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnalyticSolution1D<T> {
    pub gamma2: T,
    pub gamma1: T,
    pub gamma0: T,
    pub mean: T,
    pub variance: T,
    pub tag: ProblemTag,
}

impl<T: Scalar> AnalyticSolution1D<T> {
    pub fn value(&self, x: T) -> T {
        self.gamma2 * x * x + self.gamma1 * x + self.gamma0
    }

    pub fn control(&self, x: T) -> T {
        -(real::<T>(2.0) * self.gamma2 * x + self.gamma1)
    }

    pub fn std_dev(&self) -> T {
        self.variance.sqrt()
    }

    /// Draw a sample from the limiting Gaussian.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> T {
        self.mean + self.std_dev() * T::std_normal(rng)
    }
}

/// Two-dimensional solution: `v(x) = xᵀΓ₂x + Γ₁ᵀx + Γ₀`, control
/// `α(x) = −(2Γ₂x + Γ₁)`, limiting law `N(mean, covariance)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyticSolution2D<T> {
    pub gamma2: Mat2<T>,
    pub gamma1: Vec2<T>,
    pub gamma0: T,
    pub mean: Vec2<T>,
    pub covariance: Mat2<T>,
    pub tag: ProblemTag,
}

impl<T: Scalar> AnalyticSolution2D<T> {
    pub fn value(&self, x: &[T]) -> T {
        let g = &self.gamma2;
        x[0] * (g[0][0] * x[0] + g[0][1] * x[1])
            + x[1] * (g[1][0] * x[0] + g[1][1] * x[1])
            + self.gamma1[0] * x[0]
            + self.gamma1[1] * x[1]
            + self.gamma0
    }

    pub fn control(&self, x: &[T]) -> Vec2<T> {
        let two = real::<T>(2.0);
        [
            -(two * (self.gamma2[0][0] * x[0] + self.gamma2[0][1] * x[1]) + self.gamma1[0]),
            -(two * (self.gamma2[1][0] * x[0] + self.gamma2[1][1] * x[1]) + self.gamma1[1]),
        ]
    }

    /// Draw from the limiting Gaussian via the Cholesky factor.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec2<T> {
        let l = crate::linalg::cholesky2(&self.covariance).expect("covariance must be SPD");
        let z = [T::std_normal(rng), T::std_normal(rng)];
        [
            self.mean[0] + l[0][0] * z[0],
            self.mean[1] + l[1][0] * z[0] + l[1][1] * z[1],
        ]
    }
}

/// Either solution, for JSON export.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnalyticSolution<T> {
    OneD(AnalyticSolution1D<T>),
    TwoD(AnalyticSolution2D<T>),
}

impl<T: Scalar> AnalyticSolution<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("analytic solution serializes")
    }
}
