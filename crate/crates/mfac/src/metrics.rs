//! Error metrics against the analytic solutions and fixed-point residual
//! diagnostics.
//!
//! The three headline metrics: absolute error in the learned population
//! mean `e_μ = ‖m_N − m̂‖₂`, expected absolute error of the learned control
//! `e_α = E_{x∼μ̂}‖α_ψ(x) − α̂(x)‖₂`, and of the learned value function
//! `e_V = E_{x∼μ̂}|V(x) − v̂(x)|`, all estimated with i.i.d. draws from the
//! analytic limiting Gaussian.

use crate::analytic::{AnalyticSolution1D, AnalyticSolution2D};
use crate::approximators::GaussianPolicy;
use crate::environment::{lq_step, MfEnv};
use crate::error::{Error, Result};
use crate::linalg::{inverse, Mat2};
use crate::scalar::{dist2, real, Scalar};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Metric report for one trained run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricReport<T> {
    pub e_mu: T,
    pub e_alpha: T,
    pub e_value: T,
    pub samples: usize,
    pub seed: u64,
    pub tag: crate::analytic::ProblemTag,
}

impl<T: Scalar> MetricReport<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric report serializes")
    }

    pub fn is_finite(&self) -> bool {
        self.e_mu.is_finite() && self.e_alpha.is_finite() && self.e_value.is_finite()
    }
}

/// `e_μ`: Euclidean distance between learned and analytic means.
pub fn error_mu<T: Scalar>(learned_mean: &[T], analytic_mean: &[T]) -> T {
    debug_assert_eq!(learned_mean.len(), analytic_mean.len());
    dist2(learned_mean, analytic_mean)
}

/// Sampler of the analytic limiting Gaussian, 1D or 2D.
pub enum LimitSampler<'a, T> {
    OneD(&'a AnalyticSolution1D<T>),
    TwoD(&'a AnalyticSolution2D<T>),
}

impl<'a, T: Scalar> LimitSampler<'a, T> {
    pub fn dim(&self) -> usize {
        match self {
            LimitSampler::OneD(_) => 1,
            LimitSampler::TwoD(_) => 2,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        match self {
            LimitSampler::OneD(a) => vec![a.sample(rng)],
            LimitSampler::TwoD(a) => a.sample(rng).to_vec(),
        }
    }

    pub fn control(&self, x: &[T]) -> Vec<T> {
        match self {
            LimitSampler::OneD(a) => vec![a.control(x[0])],
            LimitSampler::TwoD(a) => a.control(x).to_vec(),
        }
    }

    pub fn value(&self, x: &[T]) -> T {
        match self {
            LimitSampler::OneD(a) => a.value(x[0]),
            LimitSampler::TwoD(a) => a.value(x),
        }
    }
}

/// `e_α`: Monte Carlo mean Euclidean error of the policy's mean action
/// against the analytic optimal control, over `l` draws from the analytic
/// limiting Gaussian.
pub fn error_alpha<T: Scalar, R: Rng + ?Sized>(
    actor: &GaussianPolicy<T>,
    analytic: &LimitSampler<'_, T>,
    l: usize,
    rng: &mut R,
) -> T {
    assert!(l >= 1);
    let mut acc = T::zero();
    for _ in 0..l {
        let x = analytic.draw(rng);
        let learned = actor.mean_action(&x);
        let optimal = analytic.control(&x);
        acc += dist2(&learned, &optimal);
    }
    acc / real(l as f64)
}

/// `e_V`: Monte Carlo mean absolute error of a value read-out (single critic
/// or min-critic composite) against the analytic value function.
pub fn error_value<T: Scalar, R: Rng + ?Sized>(
    value_fn: impl Fn(&[T]) -> T,
    analytic: &LimitSampler<'_, T>,
    l: usize,
    rng: &mut R,
) -> T {
    assert!(l >= 1);
    let mut acc = T::zero();
    for _ in 0..l {
        let x = analytic.draw(rng);
        acc += (value_fn(&x) - analytic.value(&x)).abs();
    }
    acc / real(l as f64)
}

/// Monte Carlo fixed-point defect of the population-law operator: simulate
/// the dynamics under `policy` with the mean-field argument frozen at
/// `claimed_mean`; return the Euclidean distance between the post-burn-in
/// time-averaged state and the claimed mean.
pub fn fixed_point_residual<T, E, R>(
    policy: impl Fn(&[T]) -> Vec<T>,
    env: &E,
    claimed_mean: &[T],
    horizon: usize,
    burn_in: usize,
    rng: &mut R,
) -> T
where
    T: Scalar,
    E: MfEnv<T>,
    R: Rng + ?Sized,
{
    assert!(horizon > burn_in);
    let d = env.state_dim();
    let mut x = claimed_mean.to_vec();
    let mut acc = vec![T::zero(); d];
    let mut count = 0usize;
    for n in 0..horizon {
        let a = policy(&x);
        let (next, _) = lq_step(env, &x, &a, rng);
        x = next;
        if n >= burn_in {
            for (s, &v) in acc.iter_mut().zip(&x) {
                *s += v;
            }
            count += 1;
        }
    }
    let avg: Vec<T> = acc.iter().map(|&s| s / real(count as f64)).collect();
    dist2(&avg, claimed_mean)
}

/// Default burn-in for [`fixed_point_residual`]: 20% of the horizon.
pub fn default_burn_in(horizon: usize) -> usize {
    horizon / 5
}

/// Fraction of samples within Mahalanobis distance `radius` of the analytic
/// 2D mean under the analytic covariance.
pub fn mahalanobis_coverage<T: Scalar>(
    samples: &[[T; 2]],
    analytic: &AnalyticSolution2D<T>,
    radius: T,
) -> Result<T> {
    let inv: Mat2<T> = inverse(&analytic.covariance).map_err(|_| Error::SingularCovariance)?;
    if !crate::linalg::is_positive_definite(&analytic.covariance) {
        return Err(Error::SingularCovariance);
    }
    let r2 = radius * radius;
    let mut inside = 0usize;
    for s in samples {
        let d = [s[0] - analytic.mean[0], s[1] - analytic.mean[1]];
        let md2 = d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1])
            + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]);
        if md2 <= r2 {
            inside += 1;
        }
    }
    Ok(real::<T>(inside as f64) / real(samples.len() as f64))
}

/// Cost-based one-step TD error `δ = c + γ·v_next − v_cur` where `c` is the
/// step cost (the negated reward).
pub fn td_error<T: Scalar>(step_cost: T, v_next: T, v_cur: T, gamma: T) -> T {
    step_cost + gamma * v_next - v_cur
}
