//! Linear-quadratic benchmark models.

use super::{require_global, MeanArgs, MfEnv};
use crate::scalar::{real, Scalar};
use serde::{Deserialize, Serialize};

/// Default safety clip on every state coordinate, one unit beyond the
/// truncated bin region and outside every shipped benchmark's stationary
/// support. Guards divergence during early exploration; beyond it the tanh
/// approximators saturate and stop producing learning signal, so a tight
/// clip keeps recovery possible.
pub const DEFAULT_STATE_CLIP: f64 = 3.0;

fn clip_state<T: Scalar>(out: &mut [T], lim: T) -> bool {
    let mut clipped = false;
    for v in out.iter_mut() {
        if *v > lim {
            *v = lim;
            clipped = true;
        } else if *v < -lim {
            *v = -lim;
            clipped = true;
        }
    }
    clipped
}

/// Scalar LQ mean-field model with running cost
/// `½a² + c₁(x−c₂m)² + c₃(x−c₄)² + c₅m²` and dynamics `dX = a·dt + σ·dW`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LqModel1D<T> {
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub c4: T,
    pub c5: T,
    pub sigma: T,
    pub beta: T,
    pub dt: T,
    /// Safety clip per state coordinate.
    pub state_clip: T,
}

impl<T: Scalar> LqModel1D<T> {
    pub fn new(c: [T; 5], sigma: T, beta: T, dt: T) -> Self {
        assert!(sigma > T::zero() && dt > T::zero() && beta > T::zero());
        Self {
            c1: c[0],
            c2: c[1],
            c3: c[2],
            c4: c[3],
            c5: c[4],
            sigma,
            beta,
            dt,
            state_clip: real(DEFAULT_STATE_CLIP),
        }
    }

    /// Benchmark coefficients: c = (0.25, 1.5, 0.5, 0.6, 1.0), σ = 0.3,
    /// β = 1, Δt = 0.01.
    pub fn paper_preset() -> Self {
        Self::new(
            [real(0.25), real(1.5), real(0.5), real(0.6), real(1.0)],
            real(0.3),
            real(1.0),
            real(0.01),
        )
    }

    pub fn gamma(&self) -> T {
        (-self.beta * self.dt).exp()
    }
}

impl<T: Scalar> MfEnv<T> for LqModel1D<T> {
    fn state_dim(&self) -> usize {
        1
    }
    fn action_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn dt(&self) -> T {
        self.dt
    }
    fn gamma(&self) -> T {
        LqModel1D::gamma(self)
    }

    fn cost_rate(&self, x: &[T], a: &[T], means: MeanArgs<'_, T>) -> T {
        let m = means.local[0];
        let half = real::<T>(0.5);
        let d1 = x[0] - self.c2 * m;
        let d3 = x[0] - self.c4;
        half * a[0] * a[0] + self.c1 * d1 * d1 + self.c3 * d3 * d3 + self.c5 * m * m
    }

    fn step_deterministic(&self, x: &[T], a: &[T], z: &[T], out: &mut [T]) -> bool {
        out[0] = x[0] + a[0] * self.dt + self.sigma * self.dt.sqrt() * z[0];
        clip_state(out, self.state_clip)
    }
}

/// Two-dimensional LQ model: cost
/// `½aᵀa + (x−C₂m)ᵀC₁(x−C₂m) + (x−c₄)ᵀC₃(x−c₄) + mᵀC₅m`,
/// dynamics `dX = a·dt + σ·dW` with matrix volatility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LqModel2D<T> {
    /// Symmetric positive-definite, row-major 2×2.
    pub c1: [[T; 2]; 2],
    pub c2: [[T; 2]; 2],
    pub c3: [[T; 2]; 2],
    pub c4: [T; 2],
    pub c5: [[T; 2]; 2],
    pub sigma: [[T; 2]; 2],
    pub beta: T,
    pub dt: T,
    /// Safety clip per state coordinate.
    pub state_clip: T,
}

impl<T: Scalar> LqModel2D<T> {
    /// Benchmark coefficient table with σ = 0.3·I, β = 1, Δt = 0.01.
    pub fn paper_preset() -> Self {
        let m = |a: f64, b: f64, c: f64, d: f64| [[real(a), real(b)], [real(c), real(d)]];
        Self {
            c1: m(0.964, 0.236, 0.236, 0.076),
            c2: m(0.677, 0.937, 0.937, 1.357),
            c3: m(0.988, 1.118, 1.118, 1.483),
            c4: [real(0.810), real(0.872)],
            c5: m(1.511, 0.072, 0.072, 1.520),
            sigma: m(0.3, 0.0, 0.0, 0.3),
            beta: real(1.0),
            dt: real(0.01),
            state_clip: real(DEFAULT_STATE_CLIP),
        }
    }

    pub fn gamma(&self) -> T {
        (-self.beta * self.dt).exp()
    }
}

fn quad_form<T: Scalar>(m: &[[T; 2]; 2], u: &[T; 2]) -> T {
    u[0] * (m[0][0] * u[0] + m[0][1] * u[1]) + u[1] * (m[1][0] * u[0] + m[1][1] * u[1])
}

impl<T: Scalar> MfEnv<T> for LqModel2D<T> {
    fn state_dim(&self) -> usize {
        2
    }
    fn action_dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        2
    }
    fn dt(&self) -> T {
        self.dt
    }
    fn gamma(&self) -> T {
        LqModel2D::gamma(self)
    }

    fn cost_rate(&self, x: &[T], a: &[T], means: MeanArgs<'_, T>) -> T {
        let m = means.local;
        let half = real::<T>(0.5);
        let d1 = [
            x[0] - (self.c2[0][0] * m[0] + self.c2[0][1] * m[1]),
            x[1] - (self.c2[1][0] * m[0] + self.c2[1][1] * m[1]),
        ];
        let d3 = [x[0] - self.c4[0], x[1] - self.c4[1]];
        let mm = [m[0], m[1]];
        half * (a[0] * a[0] + a[1] * a[1])
            + quad_form(&self.c1, &d1)
            + quad_form(&self.c3, &d3)
            + quad_form(&self.c5, &mm)
    }

    fn step_deterministic(&self, x: &[T], a: &[T], z: &[T], out: &mut [T]) -> bool {
        let s = self.dt.sqrt();
        out[0] = x[0] + a[0] * self.dt + s * (self.sigma[0][0] * z[0] + self.sigma[0][1] * z[1]);
        out[1] = x[1] + a[1] * self.dt + s * (self.sigma[1][0] * z[0] + self.sigma[1][1] * z[1]);
        clip_state(out, self.state_clip)
    }
}

/// Two-population scalar LQ model for the control-game setting. Competition
/// terms (`c₁`, `c₂`, `c₅`) read the slow global mean; cooperation terms
/// (`c̃₁`, `c̃₂`, `c̃₅`) read the fast local mean:
/// `½a² + c₁(x−c₂m̃)² + c₃(x−c₄)² + c₅m̃² + c̃₁(x−c̃₂m)² + c̃₅m²`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MfcgModel<T> {
    pub base: LqModel1D<T>,
    pub ct1: T,
    pub ct2: T,
    pub ct5: T,
}

impl<T: Scalar> MfcgModel<T> {
    pub fn new(base: LqModel1D<T>, ct1: T, ct2: T, ct5: T) -> Self {
        Self { base, ct1, ct2, ct5 }
    }

    /// Repository default: benchmark base coefficients plus
    /// c̃₁ = 0.3, c̃₂ = 1.25, c̃₅ = 0.25.
    pub fn default_preset() -> Self {
        Self::new(LqModel1D::paper_preset(), real(0.3), real(1.25), real(0.25))
    }

    pub fn gamma(&self) -> T {
        self.base.gamma()
    }
}

impl<T: Scalar> MfEnv<T> for MfcgModel<T> {
    fn state_dim(&self) -> usize {
        1
    }
    fn action_dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn dt(&self) -> T {
        self.base.dt
    }
    fn gamma(&self) -> T {
        MfcgModel::gamma(self)
    }

    fn cost_rate(&self, x: &[T], a: &[T], means: MeanArgs<'_, T>) -> T {
        let m_local = means.local[0];
        let m_global = require_global(&means).expect("MFCG cost needs a global mean")[0];
        let b = &self.base;
        let half = real::<T>(0.5);
        let d1 = x[0] - b.c2 * m_global;
        let d3 = x[0] - b.c4;
        let dt1 = x[0] - self.ct2 * m_local;
        half * a[0] * a[0]
            + b.c1 * d1 * d1
            + b.c3 * d3 * d3
            + b.c5 * m_global * m_global
            + self.ct1 * dt1 * dt1
            + self.ct5 * m_local * m_local
    }

    fn step_deterministic(&self, x: &[T], a: &[T], z: &[T], out: &mut [T]) -> bool {
        self.base.step_deterministic(x, a, z, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{env_step, env_step_group, step_cost};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_cost_vanishes() {
        // x=c4, a=0, m=0, c1=0, c5=0 → every penalty term vanishes
        let model = LqModel1D::new([0.0, 1.5, 0.5, 0.6, 0.0], 0.3, 1.0, 0.01);
        let c = step_cost(&model, &[0.6], &[0.0], MeanArgs::single(&[0.0]));
        assert_eq!(c, 0.0);
    }

    #[test]
    fn paper_coefficients_cost_at_origin() {
        // f(0,0,0) = c3·c4² = 0.18, reward −0.18·Δt = −0.0018
        let model = LqModel1D::<f64>::paper_preset();
        let f = model.cost_rate(&[0.0], &[0.0], MeanArgs::single(&[0.0]));
        assert!((f - 0.18).abs() < 1e-15);
        assert!((step_cost(&model, &[0.0], &[0.0], MeanArgs::single(&[0.0])) - 0.0018).abs() < 1e-18);
    }

    #[test]
    fn mfcg_reduces_to_lq_when_cooperation_terms_vanish() {
        let base = LqModel1D::<f64>::paper_preset();
        let mfcg = MfcgModel::new(base, 0.0, 0.7, 0.0);
        let m = [0.37];
        for (x, a) in [(0.2, -0.5), (-1.1, 0.9), (0.6, 0.0)] {
            let f_base = base.cost_rate(&[x], &[a], MeanArgs::single(&m));
            let f_mfcg = mfcg.cost_rate(&[x], &[a], MeanArgs::local_global(&[9.9], &m));
            assert!((f_base - f_mfcg).abs() < 1e-15);
        }
    }

    #[test]
    fn drift_only_step() {
        // z=0: x=1, a=2, Δt=0.01 → x' = 1.02
        let model = LqModel1D::<f64>::paper_preset();
        let mut out = [0.0];
        let clipped = model.step_deterministic(&[1.0], &[2.0], &[0.0], &mut out);
        assert!(!clipped);
        assert!((out[0] - 1.02).abs() < 1e-15);
    }

    #[test]
    fn state_clip_engages() {
        let model = LqModel1D::<f64>::paper_preset();
        let mut out = [0.0];
        let clipped = model.step_deterministic(&[2.99], &[100.0], &[0.0], &mut out);
        assert!(clipped);
        assert_eq!(out[0], model.state_clip);
        let mut model_wide = model;
        model_wide.state_clip = 10.0;
        let clipped2 = model_wide.step_deterministic(&[2.99], &[100.0], &[0.0], &mut out);
        assert!(!clipped2);
        assert!((out[0] - 3.99).abs() < 1e-12);
    }

    #[test]
    fn deterministic_transition_at_origin() {
        // z=0 hook, benchmark model, x=0, a=0, m=0 → next 0, reward −0.0018
        let model = LqModel1D::<f64>::paper_preset();
        let mut out = [9.9];
        model.step_deterministic(&[0.0], &[0.0], &[0.0], &mut out);
        assert_eq!(out[0], 0.0);
        let r = -step_cost(&model, &[0.0], &[0.0], MeanArgs::single(&[0.0]));
        assert!((r + 0.0018).abs() < 1e-18);
    }

    #[test]
    fn increment_variance_matches_sigma_sq_dt() {
        // a=0 over 10^5 steps from x=0: Var(x'−x) ≈ σ²Δt within 5%
        let model = LqModel1D::<f64>::paper_preset();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let (x1, _) = crate::environment::lq_step(&model, &[0.0], &[0.0], &mut rng);
            sum += x1[0];
            sumsq += x1[0] * x1[0];
        }
        let var = sumsq / n as f64 - (sum / n as f64).powi(2);
        let want = model.sigma * model.sigma * model.dt;
        assert!((var - want).abs() / want < 0.05, "var {var} want {want}");
    }

    #[test]
    fn two_d_increment_covariance() {
        // diagonal σ = 0.3 I → increment covariance ≈ 0.09·Δt·I within 5%
        let model = LqModel2D::<f64>::paper_preset();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 100_000;
        let (mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let (x, _) = crate::environment::lq_step(&model, &[0.0, 0.0], &[0.0, 0.0], &mut rng);
            s11 += x[0] * x[0];
            s22 += x[1] * x[1];
            s12 += x[0] * x[1];
        }
        let want = 0.09 * model.dt;
        assert!((s11 / n as f64 - want).abs() / want < 0.05);
        assert!((s22 / n as f64 - want).abs() / want < 0.05);
        assert!((s12 / n as f64).abs() < 0.05 * want + 3.0 * want / (n as f64).sqrt() * 3.0);
    }

    #[test]
    fn group_draws_are_reproducible_and_m1_matches_env_step() {
        let model = LqModel1D::<f64>::paper_preset();
        let means = [0.3];
        let g1 = env_step_group(
            &model, &[0.5], &[0.2], MeanArgs::single(&means), 7, 4,
            &mut ChaCha8Rng::seed_from_u64(3),
        );
        let g2 = env_step_group(
            &model, &[0.5], &[0.2], MeanArgs::single(&means), 7, 4,
            &mut ChaCha8Rng::seed_from_u64(3),
        );
        assert_eq!(g1, g2);
        let single = env_step(
            &model, &[0.5], &[0.2], MeanArgs::single(&means), 7,
            &mut ChaCha8Rng::seed_from_u64(3),
        );
        let g = env_step_group(
            &model, &[0.5], &[0.2], MeanArgs::single(&means), 7, 1,
            &mut ChaCha8Rng::seed_from_u64(3),
        );
        assert_eq!(g[0], single);
    }
}
