//! Diagonal Gaussian policy with a shared trunk and separate mean/std heads.

use super::{check_dim, Activation, GradientVector, Mlp, Parametric};
use crate::error::Result;
use crate::scalar::{real, Scalar};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Architecture and floor settings for [`GaussianPolicy`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PolicyArch {
    pub trunk_width: usize,
    pub head_width: usize,
    /// Additive floor on the emitted standard deviation, keeps a minimal
    /// level of exploration as the policy turns deterministic.
    pub std_floor: f64,
    /// Initial standard deviation (realized by shifting the std head's
    /// output bias, weights untouched).
    pub init_std: f64,
}

impl Default for PolicyArch {
    fn default() -> Self {
        Self {
            trunk_width: 64,
            head_width: 64,
            std_floor: 1e-5,
            init_std: 0.1,
        }
    }
}

/// Stochastic policy `Π_ψ(a|x) = N(a; mean_ψ(x), diag(std_ψ(x))²)`.
///
/// The std head output `u` maps to `σ = exp(u) + ε_σ`, so emitted standard
/// deviations are strictly positive and `log Π_ψ(a|x)` is finite for every
/// finite `(x, a)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianPolicy<T> {
    trunk: Mlp<T>,
    mean_head: Mlp<T>,
    std_head: Mlp<T>,
    std_floor: T,
    state_dim: usize,
    action_dim: usize,
}

impl<T: Scalar> GaussianPolicy<T> {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        arch: &PolicyArch,
        rng: &mut R,
    ) -> Self {
        let trunk = Mlp::new(&[state_dim, arch.trunk_width], Activation::Tanh, Activation::Tanh, rng);
        let mean_head = Mlp::new(
            &[arch.trunk_width, arch.head_width, action_dim],
            Activation::Tanh,
            Activation::Identity,
            rng,
        );
        let mut std_head = Mlp::new(
            &[arch.trunk_width, arch.head_width, action_dim],
            Activation::Tanh,
            Activation::Identity,
            rng,
        );
        let shift = real::<T>(arch.init_std.ln());
        for r in 0..action_dim {
            std_head.nudge_output_bias(r, shift);
        }
        Self {
            trunk,
            mean_head,
            std_head,
            std_floor: real(arch.std_floor),
            state_dim,
            action_dim,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn std_floor(&self) -> T {
        self.std_floor
    }

    /// Mean and standard deviation of the action distribution at `x`.
    pub fn mean_std(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        check_dim(self.state_dim, x, "policy input").expect("state dimension");
        let h = self.trunk.forward(x);
        let mean = self.mean_head.forward(&h);
        let std = self
            .std_head
            .forward(&h)
            .into_iter()
            .map(|u| u.exp() + self.std_floor)
            .collect();
        (mean, std)
    }

    /// Deterministic read-out of the policy (the mean action).
    pub fn mean_action(&self, x: &[T]) -> Vec<T> {
        let h = self.trunk.forward(x);
        self.mean_head.forward(&h)
    }

    /// `a = mean + std ⊙ z` for caller-supplied standard normal `z`.
    /// This is the deterministic core of [`Self::sample`], exposed so tests
    /// can inject `z = 0`.
    pub fn sample_with_noise(&self, x: &[T], z: &[T]) -> Vec<T> {
        let (mean, std) = self.mean_std(x);
        mean.iter()
            .zip(&std)
            .zip(z)
            .map(|((&m, &s), &zi)| m + s * zi)
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: &[T], rng: &mut R) -> Vec<T> {
        let z: Vec<T> = (0..self.action_dim).map(|_| T::std_normal(rng)).collect();
        self.sample_with_noise(x, &z)
    }

    /// `log Π_ψ(a|x)` for the diagonal Gaussian with floored std.
    pub fn log_prob(&self, x: &[T], a: &[T]) -> T {
        let (mean, std) = self.mean_std(x);
        let half = real::<T>(0.5);
        let ln_2pi = real::<T>(2.0) * T::PI();
        let mut lp = T::zero();
        for ((&m, &s), &ai) in mean.iter().zip(&std).zip(a) {
            let z = (ai - m) / s;
            lp = lp - half * z * z - s.ln() - half * ln_2pi.ln();
        }
        lp
    }

    /// `∇_ψ log Π_ψ(a|x)`.
    pub fn log_prob_grad(&self, x: &[T], a: &[T]) -> GradientVector<T> {
        self.log_prob_grad_weighted(x, std::slice::from_ref(&a.to_vec()), &[T::one()])
    }

    /// `∇_ψ Σ_m w_m log Π_ψ(a_m|x)` computed with a single backward pass.
    ///
    /// With `w_m = δ_m / M` this is exactly the group-averaged actor update
    /// direction; averaging at the head outputs is algebraically identical to
    /// summing per-action backward passes.
    pub fn log_prob_grad_weighted(
        &self,
        x: &[T],
        actions: &[Vec<T>],
        weights: &[T],
    ) -> GradientVector<T> {
        assert_eq!(actions.len(), weights.len());
        let h = self.trunk.forward(x);
        let mean = self.mean_head.forward(&h);
        let us = self.std_head.forward(&h);
        let std: Vec<T> = us.iter().map(|&u| u.exp() + self.std_floor).collect();

        // d/d mean_i  = Σ_m w_m (a_mi − mean_i) / σ_i²
        // d/d u_i     = Σ_m w_m ((a_mi − mean_i)² − σ_i²) / σ_i³ · exp(u_i)
        let mut d_mean = vec![T::zero(); self.action_dim];
        let mut d_u = vec![T::zero(); self.action_dim];
        for (a, &w) in actions.iter().zip(weights) {
            debug_assert_eq!(a.len(), self.action_dim);
            for i in 0..self.action_dim {
                let diff = a[i] - mean[i];
                let s = std[i];
                d_mean[i] += w * diff / (s * s);
                d_u[i] += w * ((diff * diff - s * s) / (s * s * s)) * us[i].exp();
            }
        }

        let n_trunk = self.trunk.param_count();
        let n_mean = self.mean_head.param_count();
        let n_std = self.std_head.param_count();
        let mut grad = vec![T::zero(); n_trunk + n_mean + n_std];

        let (g_trunk, rest) = grad.split_at_mut(n_trunk);
        let (g_mean, g_std) = rest.split_at_mut(n_mean);
        let dh_mean = self.mean_head.backward_accumulate(&h, &d_mean, g_mean);
        let dh_std = self.std_head.backward_accumulate(&h, &d_u, g_std);
        let dh: Vec<T> = dh_mean.iter().zip(&dh_std).map(|(&a, &b)| a + b).collect();
        self.trunk.backward_accumulate(x, &dh, g_trunk);

        GradientVector::new(grad)
    }
}

impl<T: Scalar> Parametric<T> for GaussianPolicy<T> {
    fn param_count(&self) -> usize {
        self.trunk.param_count() + self.mean_head.param_count() + self.std_head.param_count()
    }

    fn flatten_into(&self, out: &mut Vec<T>) {
        self.trunk.flatten_into(out);
        self.mean_head.flatten_into(out);
        self.std_head.flatten_into(out);
    }

    fn unflatten_from(&mut self, flat: &[T]) -> Result<()> {
        check_dim(self.param_count(), flat, "policy unflatten")?;
        let n_trunk = self.trunk.param_count();
        let n_mean = self.mean_head.param_count();
        self.trunk.unflatten_from(&flat[..n_trunk])?;
        self.mean_head.unflatten_from(&flat[n_trunk..n_trunk + n_mean])?;
        self.std_head.unflatten_from(&flat[n_trunk + n_mean..])?;
        Ok(())
    }
}
