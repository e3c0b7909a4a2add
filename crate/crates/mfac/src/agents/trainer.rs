//! The game training loop: one actor, one critic, one population measure,
//! learning along a single trajectory.

use super::{normalized_td, Rates};
use crate::approximators::{GaussianPolicy, Parametric, ValueApproximator};
use crate::environment::{antithetic_normals, MeanArgs, MfEnv};
use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::scalar::{real, Scalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Construction parameters for [`MfgTrainer`].
#[derive(Debug, Clone)]
pub struct MfgTrainerConfig<T> {
    pub rates: Rates<T>,
    /// Group batch size `M`.
    pub batch: usize,
    pub seed: u64,
    /// Initial state distribution: standard normal scaled by this factor
    /// around zero.
    pub init_state_std: T,
}

impl<T: Scalar> Default for MfgTrainerConfig<T> {
    fn default() -> Self {
        Self {
            rates: Rates::mfg_defaults(),
            batch: 16,
            seed: 0,
            init_state_std: T::one(),
        }
    }
}

/// Single-trajectory actor-critic trainer with an online population measure.
pub struct MfgTrainer<T, E, C> {
    pub env: E,
    pub actor: GaussianPolicy<T>,
    pub critic: C,
    pub measure: EmpiricalMeasure<T>,
    pub state: Vec<T>,
    pub step_index: u64,
    rates: Rates<T>,
    batch: usize,
    rng_actions: ChaCha8Rng,
    rng_env: ChaCha8Rng,
    pub clip_events: u64,
}

impl<T, E, C> MfgTrainer<T, E, C>
where
    T: Scalar,
    E: MfEnv<T>,
    C: ValueApproximator<T> + Serialize,
{
    /// Build a trainer with a freshly sampled initial state `X₀` and the
    /// measure started as `δ_{X₀}`.
    pub fn new(env: E, actor: GaussianPolicy<T>, critic: C, cfg: &MfgTrainerConfig<T>) -> Self {
        let mut rng_init = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng_init.set_stream(0x5eed_0001);
        let state: Vec<T> = (0..env.state_dim())
            .map(|_| cfg.init_state_std * T::std_normal(&mut rng_init))
            .collect();
        let measure = EmpiricalMeasure::dirac(&state);
        let mut rng_actions = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng_actions.set_stream(0x5eed_0002);
        let mut rng_env = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng_env.set_stream(0x5eed_0003);
        Self {
            env,
            actor,
            critic,
            measure,
            state,
            step_index: 0,
            rates: cfg.rates,
            batch: cfg.batch.max(1),
            rng_actions,
            rng_env,
            clip_events: 0,
        }
    }

    pub fn rates(&self) -> &Rates<T> {
        &self.rates
    }

    /// One full iteration: sample actions, observe rewards and next states,
    /// update measure, frozen-target critic step on the squared TD error,
    /// score-function actor step, advance the trajectory.
    pub fn step(&mut self) -> Result<()> {
        let n = self.step_index;
        let m = self.batch;
        let dt = self.env.dt();
        let gamma = self.env.gamma();
        let mean = self.measure.mean()?;

        let (pol_mean, pol_std) = self.actor.mean_std(&self.state);
        let k = self.env.action_dim();
        let zs = antithetic_normals::<T, _>(m * k, &mut self.rng_actions);
        let actions: Vec<Vec<T>> = (0..m)
            .map(|i| {
                (0..k)
                    .map(|d| pol_mean[d] + pol_std[d] * zs[i * k + d])
                    .collect()
            })
            .collect();

        let v_cur = self.critic.value(&self.state);
        let noise = antithetic_normals::<T, _>(m * self.env.noise_dim(), &mut self.rng_env);
        let mut next0: Option<Vec<T>> = None;
        let mut tds = Vec::with_capacity(m);
        let nd = self.env.noise_dim();
        let mut next = vec![T::zero(); self.env.state_dim()];
        for (i, a) in actions.iter().enumerate() {
            let cost = self.env.cost_rate(&self.state, a, MeanArgs::single(&mean)) * dt;
            let clipped = self
                .env
                .step_deterministic(&self.state, a, &noise[i * nd..(i + 1) * nd], &mut next);
            if clipped {
                self.clip_events += 1;
            }
            let td = normalized_td(cost, self.critic.value(&next), v_cur, gamma, dt);
            if !td.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step: n,
                    snapshot: self.snapshot_json(),
                });
            }
            tds.push(td);
            if i == 0 {
                next0 = Some(next.clone());
            }
        }
        let next0 = next0.expect("batch ≥ 1");

        // Population measure: μ ← μ − ρ_n(μ − δ_{X'}).
        self.measure.update(&next0, self.rates.measure.rate(n))?;

        // Critic: frozen TD target, gradient of δ̄² flows only through V(X).
        let td_bar = tds.iter().copied().sum::<T>() / real(m as f64);
        let mut critic_grad = self.critic.value_gradient(&self.state);
        critic_grad.scale(real::<T>(-2.0) * td_bar);
        self.critic
            .sgd_step(&critic_grad, self.rates.critic.rate(n))
            .map_err(|_| Error::NonFiniteGradient { step: n })?;

        // Actor: ψ ← ψ − ρ^Π ∇_ψ (1/M) Σ_m δ̂_m log Π_ψ(A_m|X).
        let weights: Vec<T> = tds.iter().map(|&d| d / real(m as f64)).collect();
        let actor_grad = self
            .actor
            .log_prob_grad_weighted(&self.state, &actions, &weights);
        self.actor
            .sgd_step(&actor_grad, self.rates.actor.rate(n))
            .map_err(|_| Error::NonFiniteGradient { step: n })?;

        self.state = next0;
        self.step_index += 1;
        Ok(())
    }

    /// Serialized trainer state for post-mortems on aborted runs.
    pub fn snapshot_json(&self) -> String {
        #[derive(Serialize)]
        struct Snapshot<'a, T, C> {
            step: u64,
            state: &'a [T],
            actor_params: Vec<T>,
            critic: &'a C,
            measure_mean: Option<Vec<T>>,
            clip_events: u64,
        }
        serde_json::to_string(&Snapshot {
            step: self.step_index,
            state: &self.state,
            actor_params: self.actor.flatten(),
            critic: &self.critic,
            measure_mean: self.measure.mean().ok(),
            clip_events: self.clip_events,
        })
        .unwrap_or_else(|e| format!("{{\"error\":\"{e}\"}}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Schedule;
    use crate::approximators::{Basis, LinearCritic, Mlp, PolicyArch};
    use crate::environment::LqModel1D;

    fn zero_rates() -> Rates<f64> {
        Rates {
            actor: Schedule::constant(0.0),
            critic: Schedule::constant(0.0),
            measure: Schedule::constant(0.0),
            measure_slow: None,
        }
    }

    fn mk_actor(seed: u64) -> GaussianPolicy<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GaussianPolicy::new(1, 1, &PolicyArch::default(), &mut rng)
    }

    #[test]
    fn zero_rates_change_only_counters_and_trajectory() {
        let env = LqModel1D::<f64>::paper_preset();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let critic: Mlp<f64> = Mlp::new(
            &[1, 16, 1],
            crate::approximators::Activation::Tanh,
            crate::approximators::Activation::Identity,
            &mut rng,
        );
        let actor = mk_actor(2);
        let cfg = MfgTrainerConfig {
            rates: zero_rates(),
            batch: 4,
            seed: 7,
            init_state_std: 1.0,
        };
        let mut t = MfgTrainer::new(env, actor, critic, &cfg);
        let actor_before = t.actor.flatten();
        let critic_before = t.critic.flatten();
        let mean_before = t.measure.mean().unwrap();
        for _ in 0..50 {
            t.step().unwrap();
        }
        assert_eq!(t.step_index, 50);
        assert_eq!(t.actor.flatten(), actor_before);
        assert_eq!(t.critic.flatten(), critic_before);
        assert_eq!(t.measure.mean().unwrap(), mean_before);
    }

    #[test]
    fn measure_rate_alone_moves_only_measure() {
        let env = LqModel1D::<f64>::paper_preset();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let critic: Mlp<f64> = Mlp::new(
            &[1, 16, 1],
            crate::approximators::Activation::Tanh,
            crate::approximators::Activation::Identity,
            &mut rng,
        );
        let mut rates = zero_rates();
        rates.measure = Schedule::constant(0.3);
        let cfg = MfgTrainerConfig {
            rates,
            batch: 2,
            seed: 3,
            init_state_std: 1.0,
        };
        let mut t = MfgTrainer::new(env, mk_actor(5), critic, &cfg);
        let actor_before = t.actor.flatten();
        let m0 = t.measure.mean().unwrap()[0];
        // replicate the exact measure recursion independently
        let mut expect = m0;
        for _ in 0..20 {
            t.step().unwrap();
            expect = 0.7 * expect + 0.3 * t.state[0];
        }
        assert_eq!(t.actor.flatten(), actor_before);
        assert!((t.measure.mean().unwrap()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_single_step() {
        // Zero-initialized linear critic and zero-weight actor at x = 0,
        // m = 0: cost rate f = c₃c₄² = 0.18, δ̂ = (0.18·Δt + γ·0 − 0)/Δt
        // = 0.18. Critic delta: θ += ρ^V·2δ̂·φ(0) on the (1, x, x²) basis.
        // Actor deltas land only on the two head output biases.
        let env = LqModel1D::<f64>::paper_preset();
        let critic = LinearCritic::with_coefficients(
            Basis::Polynomial1D { degree: 2 },
            vec![0.0, 0.0, 0.0],
        );
        let mut actor = mk_actor(11);
        let zeroed = vec![0.0; actor.param_count()];
        actor.unflatten_from(&zeroed).unwrap();
        let rates = Rates {
            actor: Schedule::constant(5e-5),
            critic: Schedule::constant(1e-4),
            measure: Schedule::constant(0.0),
            measure_slow: None,
        };
        let cfg = MfgTrainerConfig {
            rates,
            batch: 1,
            seed: 999,
            init_state_std: 0.0, // X₀ = 0 exactly
        };
        let mut t = MfgTrainer::new(env, actor, critic, &cfg);
        // capture the exact draws the trainer will use
        let mut rng_a = ChaCha8Rng::seed_from_u64(999);
        rng_a.set_stream(0x5eed_0002);
        let z_act: f64 = crate::scalar::Scalar::std_normal(&mut rng_a);
        let mut rng_e = ChaCha8Rng::seed_from_u64(999);
        rng_e.set_stream(0x5eed_0003);
        let z_env: f64 = crate::scalar::Scalar::std_normal(&mut rng_e);

        let sigma0 = 1.0f64 + 1e-5; // all params zeroed → u₀ = 0
        let a0 = sigma0 * z_act; // mean head is zero
        let dt = 0.01;
        let gamma = (-dt as f64).exp();
        let x1 = a0 * dt + 0.3 * dt.sqrt() * z_env;
        let f = 0.5 * a0 * a0 + 0.25 * 0.0f64.powi(2) /* (x−c2 m)² = 0 */
            + 0.5 * (0.0 - 0.6f64).powi(2)
            + 0.0;
        // critic value is identically zero before the update
        let td = (f * dt + gamma * 0.0 - 0.0) / dt;

        t.step().unwrap();

        // critic: θ ← θ + ρ^V·2·δ̂·φ(0) = (2e-4·δ̂, 0, 0)
        let coeffs = t.critic.coefficients();
        assert!((coeffs[0] - 2e-4 * td).abs() < 1e-15);
        assert_eq!(coeffs[1], 0.0);
        assert_eq!(coeffs[2], 0.0);

        // actor: with zero weights only the head output biases move
        // (tanh(0) activations kill every other path). In flattening order
        // the mean-head bias comes first, the std-head bias last.
        // mean-head bias delta: −ρ^Π·δ̂·(a−μ)/σ² ; std-head bias delta:
        // −ρ^Π·δ̂·((a−μ)²−σ²)/σ³·exp(u₀), u₀ = ln 0.1.
        let flat = t.actor.flatten();
        let nonzero: Vec<f64> = flat.iter().copied().filter(|v| *v != 0.0).collect();
        assert_eq!(nonzero.len(), 2, "only the two output biases move");
        let d_mean_bias = -5e-5 * td * (a0 / (sigma0 * sigma0));
        let exp_u0 = 1.0f64; // exp(0)
        let d_std_bias = -5e-5 * td * (((a0 * a0) - sigma0 * sigma0) / sigma0.powi(3)) * exp_u0;
        assert!((nonzero[0] - d_mean_bias).abs() < 1e-15, "mean bias");
        assert!((nonzero[1] - d_std_bias).abs() < 1e-15, "std bias");

        // trajectory advanced to the hand-computed next state
        assert!((t.state[0] - x1).abs() < 1e-15);
    }

    #[test]
    fn frozen_target_property() {
        // The shipped critic direction is exactly 2·δ̄·∇V(X) (semi-gradient);
        // a both-sides gradient that also differentiates through V(X')
        // produces a different update.
        let env = LqModel1D::<f64>::paper_preset();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let critic: Mlp<f64> = Mlp::new(
            &[1, 8, 1],
            crate::approximators::Activation::Tanh,
            crate::approximators::Activation::Identity,
            &mut rng,
        );
        let rates = Rates {
            actor: Schedule::constant(0.0),
            critic: Schedule::constant(1e-3),
            measure: Schedule::constant(0.0),
            measure_slow: None,
        };
        let cfg = MfgTrainerConfig {
            rates,
            batch: 1,
            seed: 55,
            init_state_std: 1.0,
        };
        let mut t = MfgTrainer::new(env, mk_actor(18), critic.clone(), &cfg);
        let before = t.critic.flatten();
        let x = t.state.clone();

        // replay the trainer's exact draws to recover (a, x', δ̂)
        let mut rng_a = ChaCha8Rng::seed_from_u64(55);
        rng_a.set_stream(0x5eed_0002);
        let z_act: f64 = crate::scalar::Scalar::std_normal(&mut rng_a);
        let mut rng_e = ChaCha8Rng::seed_from_u64(55);
        rng_e.set_stream(0x5eed_0003);
        let z_env: f64 = crate::scalar::Scalar::std_normal(&mut rng_e);
        let (pm, ps) = t.actor.mean_std(&x);
        let a = pm[0] + ps[0] * z_act;
        let mut x1 = [0.0];
        env.step_deterministic(&x, &[a], &[z_env], &mut x1);
        let m0 = t.measure.mean().unwrap();
        let f = env.cost_rate(&x, &[a], MeanArgs::single(&m0));
        let dt = env.dt();
        let td = (f * dt + env.gamma() * ValueApproximator::value(&critic, &x1)
            - ValueApproximator::value(&critic, &x)) / dt;

        t.step().unwrap();
        let after = t.critic.flatten();

        // shipped update = semi-gradient
        let semi = {
            let mut g = ValueApproximator::value_gradient(&critic, &x);
            g.scale(2.0 * td * 1e-3);
            g
        };
        for i in 0..before.len() {
            assert!(
                (after[i] - (before[i] + semi.as_slice()[i])).abs() < 1e-14,
                "param {i}"
            );
        }

        // a deliberately wrong both-sides gradient differs
        let mut wrong = ValueApproximator::value_gradient(&critic, &x);
        let g_next = ValueApproximator::value_gradient(&critic, &x1);
        wrong.add_scaled(&g_next, -env.gamma());
        wrong.scale(2.0 * td * 1e-3);
        let diff: f64 = wrong
            .as_slice()
            .iter()
            .zip(semi.as_slice())
            .map(|(w, s)| (w - s).abs())
            .sum();
        assert!(diff > 1e-9, "both-sides gradient must differ");
    }

    #[test]
    fn determinism_same_seed_same_result() {
        let run = || {
            let env = LqModel1D::<f64>::paper_preset();
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let critic: Mlp<f64> = Mlp::new(
                &[1, 16, 1],
                crate::approximators::Activation::Tanh,
                crate::approximators::Activation::Identity,
                &mut rng,
            );
            let cfg = MfgTrainerConfig {
                rates: Rates::mfg_defaults(),
                batch: 4,
                seed: 123,
                init_state_std: 1.0,
            };
            let mut t = MfgTrainer::new(env, mk_actor(3), critic, &cfg);
            for _ in 0..200 {
                t.step().unwrap();
            }
            (t.actor.flatten(), t.critic.flatten(), t.state.clone())
        };
        assert_eq!(run(), run());
    }
}
