//! Exact loss functions and gradients of the idealized systems.
//!
//! Conventions: the critic approximates the discounted cost value, so the
//! per-state Bellman residual is `R(x) = f̄(x) + γ(P̄θ)(x) − θ(x)` with the
//! policy-integrated cost `f̄` and kernel `P̄`. The critic loss is the mean
//! of `R²` over the grid and its gradient is exact (no target freezing is
//! needed in the deterministic setting; the control-side bank keeps the
//! frozen min target to mirror the sampled loop). The actor direction is
//! the exact score-function gradient `E_{a∼π}[Ã(x,a) ∇_ψ log π_ψ(a|x)]`
//! averaged over states, i.e. the gradient of the frozen-weight surrogate
//! `Σ_x Σ_a π̄(a|x) Ã(x,a) log π_ψ(a|x) / S`.

use super::model::FiniteMfModel;
use crate::scalar::{real, Scalar};

/// `L_P(ψ,θ,μ) = μ − μP^{π,μ}` (componentwise over the grid).
pub fn loss_measure<T: Scalar, M: FiniteMfModel<T>>(
    model: &M,
    pi: &[T],
    mu: &[T],
    m: T,
) -> Vec<T> {
    let s_count = model.n_states();
    let a_count = model.n_actions();
    let mut out = mu.to_vec();
    let mut row = vec![T::zero(); s_count];
    for x in 0..s_count {
        if mu[x] == T::zero() {
            continue;
        }
        for a in 0..a_count {
            let w = pi[x * a_count + a];
            if w == T::zero() {
                continue;
            }
            model.transition_row(x, a, m, &mut row);
            for (o, &p) in out.iter_mut().zip(&row) {
                *o -= mu[x] * w * p;
            }
        }
    }
    out
}

/// Policy-integrated Bellman residual per state:
/// `R(x) = Σ_a π(a|x)[f(x,a,m) + γ Σ_{x'} p(x'|x,a,m) θ(x')] − θ(x)`.
pub fn bellman_residuals<T: Scalar, M: FiniteMfModel<T>>(
    model: &M,
    pi: &[T],
    theta: &[T],
    m: T,
) -> Vec<T> {
    let s_count = model.n_states();
    let a_count = model.n_actions();
    let gamma = model.gamma();
    let mut out = vec![T::zero(); s_count];
    let mut row = vec![T::zero(); s_count];
    for x in 0..s_count {
        let mut acc = T::zero();
        for a in 0..a_count {
            let w = pi[x * a_count + a];
            if w == T::zero() {
                continue;
            }
            model.transition_row(x, a, m, &mut row);
            let ev: T = row.iter().zip(theta).map(|(&p, &t)| p * t).sum();
            acc += w * (model.cost(x, a, m) + gamma * ev);
        }
        out[x] = acc - theta[x];
    }
    out
}

/// Scalar critic loss `L_V = (1/S) Σ_x R(x)²`.
pub fn critic_loss<T: Scalar, M: FiniteMfModel<T>>(model: &M, pi: &[T], theta: &[T], m: T) -> T {
    let r = bellman_residuals(model, pi, theta, m);
    r.iter().map(|&v| v * v).sum::<T>() / real(model.n_states() as f64)
}

/// Exact gradient `∇_θ L_V` for the one-hot feature critic:
/// `∂L_V/∂θ_s = (2/S) Σ_x R(x)(γ P̄(s|x) − δ_{sx})`.
pub fn critic_gradient<T: Scalar, M: FiniteMfModel<T>>(
    model: &M,
    pi: &[T],
    theta: &[T],
    _mu: &[T],
    m: T,
) -> Vec<T> {
    let s_count = model.n_states();
    let a_count = model.n_actions();
    let gamma = model.gamma();
    let residuals = bellman_residuals(model, pi, theta, m);
    let scale = real::<T>(2.0) / real(s_count as f64);
    let mut grad = vec![T::zero(); s_count];
    let mut row = vec![T::zero(); s_count];
    for x in 0..s_count {
        let r = residuals[x];
        grad[x] -= scale * r;
        for a in 0..a_count {
            let w = pi[x * a_count + a];
            if w == T::zero() {
                continue;
            }
            model.transition_row(x, a, m, &mut row);
            for (g, &p) in grad.iter_mut().zip(&row) {
                *g += scale * r * gamma * w * p;
            }
        }
    }
    grad
}

/// Per-(state, action) advantage `Ã(x,a) = f + γ(Pθ)(x,a) − θ(x)`.
pub fn advantages<T: Scalar, M: FiniteMfModel<T>>(
    model: &M,
    theta_at: impl Fn(usize) -> T,
    m: T,
) -> Vec<T> {
    let s_count = model.n_states();
    let a_count = model.n_actions();
    let gamma = model.gamma();
    let mut out = vec![T::zero(); s_count * a_count];
    let mut row = vec![T::zero(); s_count];
    for x in 0..s_count {
        for a in 0..a_count {
            model.transition_row(x, a, m, &mut row);
            let ev: T = row
                .iter()
                .enumerate()
                .map(|(xp, &p)| p * theta_at(xp))
                .sum();
            out[x * a_count + a] = model.cost(x, a, m) + gamma * ev - theta_at(x);
        }
    }
    out
}

/// Exact score-function actor gradient for the softmax table:
/// `g(x,b) = (1/S)·π(b|x)[Ã(x,b) − Σ_a π(a|x)Ã(x,a)]`.
pub fn actor_score_gradient<T: Scalar, M: FiniteMfModel<T>>(
    model: &M,
    pi: &[T],
    theta: &[T],
    _mu: &[T],
    m: T,
) -> Vec<T> {
    let adv = advantages(model, |s| theta[s], m);
    score_from_advantages(model, pi, &adv)
}

fn score_from_advantages<T: Scalar, M: FiniteMfModel<T>>(
    model: &M,
    pi: &[T],
    adv: &[T],
) -> Vec<T> {
    let s_count = model.n_states();
    let a_count = model.n_actions();
    let scale = T::one() / real(s_count as f64);
    let mut grad = vec![T::zero(); s_count * a_count];
    for x in 0..s_count {
        let row_pi = &pi[x * a_count..(x + 1) * a_count];
        let row_adv = &adv[x * a_count..(x + 1) * a_count];
        let abar: T = row_pi.iter().zip(row_adv).map(|(&p, &v)| p * v).sum();
        for b in 0..a_count {
            grad[x * a_count + b] = scale * row_pi[b] * (row_adv[b] - abar);
        }
    }
    grad
}

/// Min-critic composite over the bank table: `V(x) = min_a q(x, a)`.
pub fn min_value_table<T: Scalar>(q: &[T], n_actions: usize) -> Vec<T> {
    q.chunks(n_actions)
        .map(|row| row.iter().fold(T::infinity(), |m, &v| m.min(v)))
        .collect()
}

/// Control-side per-bin critic direction with a frozen min target: for bin
/// `(x, a)` the residual is
/// `R = f(x, a, m^{xa}) + γ Σ_{x'} p(x'|x,a,m^{xa}) V_min(x') − q(x,a)`
/// and the semi-gradient of `R²` in `q(x,a)` is `−2R` (mean-scaled).
/// Returns `(gradient, residuals)`.
pub fn mfc_critic_residuals<T: Scalar, M: FiniteMfModel<T>>(
    model: &M,
    q: &[T],
    bin_mu: &[Vec<T>],
) -> (Vec<T>, Vec<T>) {
    let s_count = model.n_states();
    let a_count = model.n_actions();
    let gamma = model.gamma();
    let vmin = min_value_table(q, a_count);
    let scale = real::<T>(2.0) / real((s_count * a_count) as f64);
    let mut grad = vec![T::zero(); s_count * a_count];
    let mut res = vec![T::zero(); s_count * a_count];
    let mut row = vec![T::zero(); s_count];
    for x in 0..s_count {
        for a in 0..a_count {
            let i = x * a_count + a;
            let m_i: T = bin_mu[i]
                .iter()
                .enumerate()
                .map(|(s, &w)| w * model.position(s))
                .sum();
            model.transition_row(x, a, m_i, &mut row);
            let ev: T = row.iter().zip(&vmin).map(|(&p, &v)| p * v).sum();
            let r = model.cost(x, a, m_i) + gamma * ev - q[i];
            res[i] = r;
            grad[i] = -scale * r;
        }
    }
    (grad, res)
}

/// Control-side actor gradient: advantages read the min-critic composite at
/// both end points and the individual measure's mean.
pub fn mfc_actor_score_gradient<T: Scalar, M: FiniteMfModel<T>>(
    model: &M,
    pi: &[T],
    q: &[T],
    _mu: &[T],
    m: T,
) -> Vec<T> {
    let vmin = min_value_table(q, model.n_actions());
    let adv = advantages(model, |s| vmin[s], m);
    score_from_advantages(model, pi, &adv)
}
