//! Closed forms for the scalar benchmarks.

use super::{AnalyticSolution1D, ProblemTag};
use crate::environment::{LqModel1D, MfcgModel};
use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

fn gamma2_from<T: Scalar>(beta: T, coercivity: T) -> Result<T> {
    if coercivity <= T::zero() {
        return Err(Error::DegenerateModel(
            "quadratic state-cost coefficients must have positive sum".into(),
        ));
    }
    let eight = real::<T>(8.0);
    let four = real::<T>(4.0);
    Ok(((beta * beta + eight * coercivity).sqrt() - beta) / four)
}

fn limiting_variance<T: Scalar>(sigma: T, gamma2: T) -> T {
    sigma * sigma / (real::<T>(4.0) * gamma2)
}

fn gamma0_from<T: Scalar>(m: &LqModel1D<T>, mean: T, gamma1: T, gamma2: T) -> T {
    (m.c5 * mean * mean
        + m.c3 * m.c4 * m.c4
        + m.c1 * m.c2 * m.c2 * mean * mean
        + m.sigma * m.sigma * gamma2
        - real::<T>(0.5) * gamma1 * gamma1)
        / m.beta
}

/// Game solution: `Γ₂ = (−β+√(β²+8(c₁+c₃)))/4`,
/// `Γ₁ = −2Γ₂c₃c₄ / (Γ₂(β+2Γ₂) − c₁c₂)`, limiting law
/// `N(−Γ₁/(2Γ₂), σ²/(4Γ₂))`.
pub fn solve_mfg_1d<T: Scalar>(model: &LqModel1D<T>) -> Result<AnalyticSolution1D<T>> {
    let two = real::<T>(2.0);
    let gamma2 = gamma2_from(model.beta, model.c1 + model.c3)?;
    let denom = gamma2 * (model.beta + two * gamma2) - model.c1 * model.c2;
    if denom.abs() < real(1e-12) {
        return Err(Error::DegenerateModel("game linear-term denominator is zero".into()));
    }
    let gamma1 = -(two * gamma2 * model.c3 * model.c4) / denom;
    let mean = -gamma1 / (two * gamma2);
    Ok(AnalyticSolution1D {
        gamma2,
        gamma1,
        gamma0: gamma0_from(model, mean, gamma1, gamma2),
        mean,
        variance: limiting_variance(model.sigma, gamma2),
        tag: ProblemTag::Mfg,
    })
}

/// Control solution: same `Γ₂`;
/// `Γ₁ = −2Γ₂c₃c₄ / (Γ₂(β+2Γ₂) + c₅ − c₁c₂(2−c₂))`.
pub fn solve_mfc_1d<T: Scalar>(model: &LqModel1D<T>) -> Result<AnalyticSolution1D<T>> {
    let two = real::<T>(2.0);
    let gamma2 = gamma2_from(model.beta, model.c1 + model.c3)?;
    let denom = gamma2 * (model.beta + two * gamma2) + model.c5
        - model.c1 * model.c2 * (two - model.c2);
    if denom.abs() < real(1e-12) {
        return Err(Error::DegenerateModel("control linear-term denominator is zero".into()));
    }
    let gamma1 = -(two * gamma2 * model.c3 * model.c4) / denom;
    let mean = -gamma1 / (two * gamma2);
    Ok(AnalyticSolution1D {
        gamma2,
        gamma1,
        gamma0: gamma0_from(model, mean, gamma1, gamma2),
        mean,
        variance: limiting_variance(model.sigma, gamma2),
        tag: ProblemTag::Mfc,
    })
}

/// Control-game solution:
/// `Γ₂ = (−β+√(β²+8(c₁+c₃+c̃₁)))/4`,
/// `m = c₃c₄ / (c₁(1−c₂) + c̃₁(1−c̃₂)² + c₃ + c̃₅)`, `Γ₁ = −2Γ₂m`.
///
/// The mean is cross-checked against the independent fixed-point condition
/// `m = −Γ₁/(2Γ₂)` at solve time.
pub fn solve_mfcg_1d<T: Scalar>(model: &MfcgModel<T>) -> Result<AnalyticSolution1D<T>> {
    let b = &model.base;
    let two = real::<T>(2.0);
    let one = T::one();
    let gamma2 = gamma2_from(b.beta, b.c1 + b.c3 + model.ct1)?;
    let denom =
        b.c1 * (one - b.c2) + model.ct1 * (one - model.ct2) * (one - model.ct2) + b.c3 + model.ct5;
    if denom.abs() < real(1e-12) {
        return Err(Error::DegenerateModel(
            "control-game mean denominator is zero".into(),
        ));
    }
    let gamma1 = -(two * gamma2 * b.c3 * b.c4) / denom;
    let mean = b.c3 * b.c4 / denom;
    let mean_check = -gamma1 / (two * gamma2);
    if (mean - mean_check).abs() > real::<T>(1e-9) * (one + mean.abs()) {
        return Err(Error::ValidationFailed(format!(
            "control-game mean {mean} disagrees with fixed-point condition {mean_check}"
        )));
    }
    // Γ₀ from the full running cost, including the frozen global-mean terms
    // (c₅m̃² enters the cost, so it enters the value).
    let gamma0 = (b.c1 * b.c2 * b.c2 * mean * mean
        + (model.ct1 * model.ct2 * model.ct2 + model.ct5) * mean * mean
        + b.sigma * b.sigma * gamma2
        - gamma1 * gamma1 / two
        + b.c3 * b.c4 * b.c4
        + b.c5 * mean * mean)
        / b.beta;
    Ok(AnalyticSolution1D {
        gamma2,
        gamma1,
        gamma0,
        mean,
        variance: limiting_variance(b.sigma, gamma2),
        tag: ProblemTag::Mfcg,
    })
}
