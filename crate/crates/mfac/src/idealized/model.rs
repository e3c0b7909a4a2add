//! Finite grid models with mean-field coupling through the measure mean.

use crate::scalar::{real, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A finite-state, finite-action mean-field model. The population enters
/// both the transition kernel and the cost only through the measure mean
/// `m = Σ μ(s)·position(s)`; each transition row sums to one.
pub trait FiniteMfModel<T: Scalar> {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Discount `γ = e^{−β}`.
    fn gamma(&self) -> T;
    /// Spatial coordinate of grid state `s` (defines the measure mean).
    fn position(&self, s: usize) -> T;
    /// Write `p(·|s, a, m)` into `out`.
    fn transition_row(&self, s: usize, a: usize, m: T, out: &mut [T]);
    /// Running cost `f(s, a, m)`.
    fn cost(&self, s: usize, a: usize, m: T) -> T;
}

/// Random row-stochastic transitions (mean-independent) with a quadratic
/// mean-coupled cost. Small enough for direct linear-algebra oracles.
#[derive(Debug, Clone)]
pub struct RandomGridModel<T> {
    n_states: usize,
    n_actions: usize,
    gamma: T,
    positions: Vec<T>,
    /// `(S·A, S)` row-major transition table.
    rows: Vec<T>,
    /// Base cost per `(s, a)`.
    base_cost: Vec<T>,
    /// Cost coupling: `f += couple·(position(s) − kappa·m)²`.
    couple: T,
    kappa: T,
}

impl<T: Scalar> RandomGridModel<T> {
    /// The shipped 5-state, 3-action test model (fixed seed).
    pub fn shipped_5x3() -> Self {
        Self::random(5, 3, real(f64::exp(-1.0)), 1234)
    }

    pub fn random(n_states: usize, n_actions: usize, gamma: T, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            let mut row: Vec<T> = (0..n_states)
                .map(|_| real::<T>(rng.gen_range(0.05..1.0)))
                .collect();
            let z: T = row.iter().copied().sum();
            for v in &mut row {
                *v /= z;
            }
            rows.extend(row);
        }
        let base_cost: Vec<T> = (0..n_states * n_actions)
            .map(|_| real::<T>(rng.gen_range(0.0..1.0)))
            .collect();
        let positions: Vec<T> = (0..n_states)
            .map(|s| {
                real::<T>(-1.0) + real::<T>(2.0 * s as f64 / (n_states as f64 - 1.0))
            })
            .collect();
        Self {
            n_states,
            n_actions,
            gamma,
            positions,
            rows,
            base_cost,
            couple: real(0.5),
            kappa: real(0.5),
        }
    }

    /// Zero out every cost entry (used by degenerate-case tests).
    pub fn with_zero_cost(mut self) -> Self {
        for c in &mut self.base_cost {
            *c = T::zero();
        }
        self.couple = T::zero();
        self
    }
}

impl<T: Scalar> FiniteMfModel<T> for RandomGridModel<T> {
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn n_actions(&self) -> usize {
        self.n_actions
    }
    fn gamma(&self) -> T {
        self.gamma
    }
    fn position(&self, s: usize) -> T {
        self.positions[s]
    }
    fn transition_row(&self, s: usize, a: usize, _m: T, out: &mut [T]) {
        let base = (s * self.n_actions + a) * self.n_states;
        out.copy_from_slice(&self.rows[base..base + self.n_states]);
    }
    fn cost(&self, s: usize, a: usize, m: T) -> T {
        let d = self.positions[s] - self.kappa * m;
        self.base_cost[s * self.n_actions + a] + self.couple * d * d
    }
}

/// Discretized drift-controlled chain: from state `s` the drift
/// `a + pull·(kappa·m − x)` shifts a Gaussian step over the grid (rows
/// renormalized after truncation), so the mean-field coupling moves the
/// drift. Six states by default.
#[derive(Debug, Clone)]
pub struct OuChainModel<T> {
    positions: Vec<T>,
    actions: Vec<T>,
    gamma: T,
    step: T,
    noise_width: T,
    pull: T,
    kappa: T,
    target: T,
}

impl<T: Scalar> OuChainModel<T> {
    pub fn shipped_6() -> Self {
        let positions: Vec<T> = (0..6)
            .map(|s| real::<T>(-1.5 + 3.0 * s as f64 / 5.0))
            .collect();
        Self {
            positions,
            actions: vec![real(-1.0), T::zero(), real(1.0)],
            gamma: real(f64::exp(-1.0)),
            step: real(0.4),
            noise_width: real(0.55),
            pull: real(0.4),
            kappa: real(0.6),
            target: real(0.3),
        }
    }
}

impl<T: Scalar> FiniteMfModel<T> for OuChainModel<T> {
    fn n_states(&self) -> usize {
        self.positions.len()
    }
    fn n_actions(&self) -> usize {
        self.actions.len()
    }
    fn gamma(&self) -> T {
        self.gamma
    }
    fn position(&self, s: usize) -> T {
        self.positions[s]
    }
    fn transition_row(&self, s: usize, a: usize, m: T, out: &mut [T]) {
        let x = self.positions[s];
        let drift = self.actions[a] + self.pull * (self.kappa * m - x);
        let center = x + self.step * drift;
        let mut z = T::zero();
        for (o, &p) in out.iter_mut().zip(&self.positions) {
            let d = (p - center) / self.noise_width;
            *o = (-d * d / real::<T>(2.0)).exp();
            z += *o;
        }
        for o in out.iter_mut() {
            *o /= z;
        }
    }
    fn cost(&self, s: usize, a: usize, m: T) -> T {
        let x = self.positions[s];
        let half = real::<T>(0.5);
        half * self.actions[a] * self.actions[a]
            + (x - self.target) * (x - self.target)
            + half * (x - self.kappa * m) * (x - self.kappa * m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_stochastic() {
        let m5: RandomGridModel<f64> = RandomGridModel::shipped_5x3();
        let mut row = vec![0.0; 5];
        for s in 0..5 {
            for a in 0..3 {
                m5.transition_row(s, a, 0.2, &mut row);
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&p| p >= 0.0));
            }
        }
        let m6: OuChainModel<f64> = OuChainModel::shipped_6();
        let mut row6 = vec![0.0; 6];
        for s in 0..6 {
            for a in 0..3 {
                m6.transition_row(s, a, -0.4, &mut row6);
                let sum: f64 = row6.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_coupling_shifts_the_chain_drift() {
        let m6: OuChainModel<f64> = OuChainModel::shipped_6();
        let mut lo = vec![0.0; 6];
        let mut hi = vec![0.0; 6];
        m6.transition_row(2, 1, -1.0, &mut lo);
        m6.transition_row(2, 1, 1.0, &mut hi);
        let mean = |r: &[f64]| -> f64 { r.iter().zip(0..6).map(|(p, s)| p * m6.position(s)).sum() };
        assert!(mean(&hi) > mean(&lo));
    }
}
