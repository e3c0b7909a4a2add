//! Discrete-time simulated environments: linear-quadratic mean-field
//! dynamics in one and two dimensions plus the two-population variant.
//!
//! The agents consume environments through [`MfEnv`]; only the LQ family
//! ships, but the trainers never look inside the cost or dynamics.

mod lq;

pub use lq::{LqModel1D, LqModel2D, MfcgModel, DEFAULT_STATE_CLIP};

use crate::error::Result;
use crate::scalar::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Mean-field statistics passed to the running cost. MFG/MFC costs read one
/// population mean; the control-game costs read a fast local mean and a slow
/// global mean.
#[derive(Debug, Clone, Copy)]
pub struct MeanArgs<'a, T> {
    /// Mean of the measure tracking the path itself.
    pub local: &'a [T],
    /// Mean of the slowly updated global measure (control-game only).
    pub global: Option<&'a [T]>,
}

impl<'a, T> MeanArgs<'a, T> {
    pub fn single(mean: &'a [T]) -> Self {
        Self {
            local: mean,
            global: None,
        }
    }

    pub fn local_global(local: &'a [T], global: &'a [T]) -> Self {
        Self {
            local,
            global: Some(global),
        }
    }
}

/// One environment transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition<T> {
    pub next: Vec<T>,
    /// Instantaneous reward `−f·Δt`.
    pub reward: T,
    pub step: u64,
    /// True when the next state hit the safety clip.
    pub clipped: bool,
}

/// A mean-field environment with Euler–Maruyama dynamics.
pub trait MfEnv<T: Scalar> {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Dimension of the driving noise vector.
    fn noise_dim(&self) -> usize;
    fn dt(&self) -> T;
    /// Discount per step, `γ = e^{−βΔt}`.
    fn gamma(&self) -> T;

    /// Running cost rate `f(x, μ, a)` (not scaled by Δt).
    fn cost_rate(&self, x: &[T], a: &[T], means: MeanArgs<'_, T>) -> T;

    /// Deterministic Euler–Maruyama map `x' = x + a·Δt + σ·√Δt·z` with the
    /// caller supplying the standard normal vector `z`; writes into `out`
    /// and reports whether the safety clip engaged.
    fn step_deterministic(&self, x: &[T], a: &[T], z: &[T], out: &mut [T]) -> bool;
}

/// Step cost `f·Δt` (the discrete-time running cost).
pub fn step_cost<T: Scalar, E: MfEnv<T> + ?Sized>(
    env: &E,
    x: &[T],
    a: &[T],
    means: MeanArgs<'_, T>,
) -> T {
    env.cost_rate(x, a, means) * env.dt()
}

/// Sample a next state.
pub fn lq_step<T: Scalar, E: MfEnv<T> + ?Sized, R: Rng + ?Sized>(
    env: &E,
    x: &[T],
    a: &[T],
    rng: &mut R,
) -> (Vec<T>, bool) {
    let z: Vec<T> = (0..env.noise_dim()).map(|_| T::std_normal(rng)).collect();
    let mut out = vec![T::zero(); env.state_dim()];
    let clipped = env.step_deterministic(x, a, &z, &mut out);
    (out, clipped)
}

/// One full transition: reward `−f·Δt` plus a sampled next state.
pub fn env_step<T: Scalar, E: MfEnv<T> + ?Sized, R: Rng + ?Sized>(
    env: &E,
    x: &[T],
    a: &[T],
    means: MeanArgs<'_, T>,
    step: u64,
    rng: &mut R,
) -> Transition<T> {
    let reward = -step_cost(env, x, a, means);
    let (next, clipped) = lq_step(env, x, a, rng);
    Transition {
        next,
        reward,
        step,
        clipped,
    }
}

/// Group batch: `m` next-state draws from the same `(x, a)`, sharing one
/// reward. Draws are antithetic in pairs (`z`, `−z`) to cut the Monte Carlo
/// variance of averaged TD targets; each draw keeps the exact marginal law.
/// `m = 1` reduces to a plain [`env_step`].
pub fn env_step_group<T: Scalar, E: MfEnv<T> + ?Sized, R: Rng + ?Sized>(
    env: &E,
    x: &[T],
    a: &[T],
    means: MeanArgs<'_, T>,
    step: u64,
    m: usize,
    rng: &mut R,
) -> Vec<Transition<T>> {
    assert!(m >= 1);
    let reward = -step_cost(env, x, a, means);
    let mut out = Vec::with_capacity(m);
    let mut z = vec![T::zero(); env.noise_dim()];
    for draw in 0..m {
        if draw % 2 == 0 {
            for zi in z.iter_mut() {
                *zi = T::std_normal(rng);
            }
        } else {
            for zi in z.iter_mut() {
                *zi = -*zi;
            }
        }
        let mut next = vec![T::zero(); env.state_dim()];
        let clipped = env.step_deterministic(x, a, &z, &mut next);
        out.push(Transition {
            next,
            reward,
            step,
            clipped,
        });
    }
    out
}

/// Antithetic standard-normal draws: pairs `(z, −z)`.
pub fn antithetic_normals<T: Scalar, R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<T> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        if i % 2 == 0 {
            out.push(T::std_normal(rng));
        } else {
            let prev = out[i - 1];
            out.push(-prev);
        }
    }
    out
}

/// Validate that the caller passed the mean arity the model expects.
pub(crate) fn require_global<'a, T>(means: &MeanArgs<'a, T>) -> Result<&'a [T]> {
    means.global.ok_or(crate::error::Error::DimensionMismatch {
        expected: 2,
        got: 1,
        context: "control-game cost needs local and global means",
    })
}
