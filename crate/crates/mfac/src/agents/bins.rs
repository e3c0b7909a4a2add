//! The control-side training loop: a bank of per-bin critics trained on
//! forced midpoint actions, per-bin population measures, a min-critic value
//! read-out, and an individual path that trains the shared actor. With a
//! second, slowly updated global measure the same loop solves the
//! control-game problem.

use super::{normalized_td, Rates};
use crate::approximators::{EvalScratch, GaussianPolicy, Parametric, ValueApproximator};
use crate::environment::{antithetic_normals, MeanArgs, MfEnv};
use crate::error::{Error, Result};
use crate::measures::{BinPartition, EmpiricalMeasure};
use crate::scalar::{real, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Construction parameters for [`BinTrainer`].
#[derive(Debug, Clone)]
pub struct BinTrainerConfig<T> {
    pub rates: Rates<T>,
    pub batch: usize,
    pub seed: u64,
    pub init_state_std: T,
}

impl<T: Scalar> Default for BinTrainerConfig<T> {
    fn default() -> Self {
        Self {
            rates: Rates::mfc_defaults(),
            batch: 16,
            seed: 0,
            init_state_std: T::one(),
        }
    }
}

/// Trainer with one critic, one path and one measure per bin, plus the
/// individual actor path. `slow` activates the control-game variant.
pub struct BinTrainer<T, E, C> {
    pub env: E,
    pub partition: BinPartition<T>,
    pub actor: GaussianPolicy<T>,
    /// One critic per bin, identically initialized (clones of one template).
    /// Identical initialization keeps the min-critic read-out continuous
    /// across cell boundaries at the start of training; independently drawn
    /// banks feed spurious cross-cell value jumps of order one into the TD
    /// errors for thousands of steps.
    pub bank: Vec<C>,
    pub bin_states: Vec<Vec<T>>,
    pub bin_measures: Vec<EmpiricalMeasure<T>>,
    pub state: Vec<T>,
    pub measure: EmpiricalMeasure<T>,
    /// Slow global measure (control game); `None` for plain control runs.
    pub slow_measure: Option<EmpiricalMeasure<T>>,
    pub step_index: u64,
    rates: Rates<T>,
    batch: usize,
    rng_actions: ChaCha8Rng,
    rng_env: ChaCha8Rng,
    pub clip_events: u64,
    /// Actions logged on bin paths in the most recent step (bin index,
    /// forced flag, action), for diagnostics and the policy-definition
    /// invariant.
    pub last_bin_actions: Vec<(usize, bool, Vec<T>)>,
}

impl<T, E, C> BinTrainer<T, E, C>
where
    T: Scalar,
    E: MfEnv<T>,
    C: ValueApproximator<T> + Clone + Serialize,
{
    /// Build a trainer: bin path `i` starts uniform in its own state cell
    /// with measure `δ_{X^i₀}`; the individual path starts from a scaled
    /// standard normal. `critic_template` is cloned across the bank. For the
    /// control game (`rates.measure_slow` set) the slow global measure
    /// starts as `δ_{X₀}` alongside the fast one.
    pub fn new(
        env: E,
        partition: BinPartition<T>,
        actor: GaussianPolicy<T>,
        critic_template: C,
        cfg: &BinTrainerConfig<T>,
    ) -> Self {
        let mut rng_init = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng_init.set_stream(0x5eed_0101);
        let nb = partition.n_bins();
        let d = env.state_dim();
        let mut bin_states = Vec::with_capacity(nb);
        let mut bin_measures = Vec::with_capacity(nb);
        for i in 1..=nb {
            let cell = partition.proj_state_cell(i);
            let x: Vec<T> = (0..d)
                .map(|a| rng_init.gen_range(cell.lo[a]..cell.hi[a]))
                .collect();
            bin_measures.push(EmpiricalMeasure::dirac(&x));
            bin_states.push(x);
        }
        let state: Vec<T> = (0..d)
            .map(|_| cfg.init_state_std * T::std_normal(&mut rng_init))
            .collect();
        let measure = EmpiricalMeasure::dirac(&state);
        let slow_measure = cfg
            .rates
            .measure_slow
            .as_ref()
            .map(|_| EmpiricalMeasure::dirac(&state));
        let bank = vec![critic_template; nb];
        let mut rng_actions = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng_actions.set_stream(0x5eed_0102);
        let mut rng_env = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng_env.set_stream(0x5eed_0103);
        Self {
            env,
            partition,
            actor,
            bank,
            bin_states,
            bin_measures,
            state,
            measure,
            slow_measure,
            step_index: 0,
            rates: cfg.rates,
            batch: cfg.batch.max(1),
            rng_actions,
            rng_env,
            clip_events: 0,
            last_bin_actions: Vec::new(),
        }
    }

    pub fn rates(&self) -> &Rates<T> {
        &self.rates
    }

    /// Min-critic value `V(x) = min_j V_{θ^j}(x)` over the critics sharing
    /// the state cell containing `x` (out-of-region states clamp to the
    /// nearest cell).
    pub fn min_value(&self, x: &[T]) -> T {
        let mut scratch = EvalScratch::default();
        self.min_value_buffered(x, &mut scratch)
    }

    fn min_value_buffered(&self, x: &[T], scratch: &mut EvalScratch<T>) -> T {
        let j = self.partition.state_cell_of(x);
        let mut best = T::infinity();
        for i in self.partition.bins_of_state_cell(j) {
            let v = self.bank[i - 1].value_buffered(x, scratch);
            if v < best {
                best = v;
            }
        }
        best
    }

    fn mean_args<'a>(&self, local: &'a [T], slow: &'a Option<Vec<T>>) -> MeanArgs<'a, T> {
        match slow {
            Some(g) => MeanArgs::local_global(local, g),
            None => MeanArgs::single(local),
        }
    }

    /// One full iteration over every bin path plus the individual path.
    pub fn step(&mut self) -> Result<()> {
        let mut scratch = EvalScratch::default();
        let n = self.step_index;
        let m_batch = self.batch;
        let dt = self.env.dt();
        let gamma = self.env.gamma();
        let rho_measure = self.rates.measure.rate(n);
        let rho_critic = self.rates.critic.rate(n);
        let nd = self.env.noise_dim();
        let d = self.env.state_dim();
        let k = self.env.action_dim();
        let slow_mean: Option<Vec<T>> = match &self.slow_measure {
            Some(s) => Some(s.mean()?),
            None => None,
        };
        self.last_bin_actions.clear();

        let nb = self.partition.n_bins();
        let mut next = vec![T::zero(); d];
        for i in 1..=nb {
            let x_i = self.bin_states[i - 1].clone();
            let in_cell = self.partition.proj_state_cell(i).contains(&x_i);
            if in_cell {
                // Forced midpoint action, critic update toward the frozen
                // min-critic target averaged over the group.
                let a_i = self.partition.midpoint_action(i);
                let local_mean = self.bin_measures[i - 1].mean()?;
                let cost = self
                    .env
                    .cost_rate(&x_i, &a_i, self.mean_args(&local_mean, &slow_mean))
                    * dt;
                let noise = antithetic_normals::<T, _>(m_batch * nd, &mut self.rng_env);
                let v_cur = self.bank[i - 1].value_buffered(&x_i, &mut scratch);
                let mut target_sum = T::zero();
                let mut next0: Option<Vec<T>> = None;
                for b in 0..m_batch {
                    let clipped = self.env.step_deterministic(
                        &x_i,
                        &a_i,
                        &noise[b * nd..(b + 1) * nd],
                        &mut next,
                    );
                    if clipped {
                        self.clip_events += 1;
                    }
                    target_sum += cost + gamma * self.min_value_buffered(&next, &mut scratch);
                    if b == 0 {
                        next0 = Some(next.clone());
                    }
                }
                let td = (target_sum / real(m_batch as f64) - v_cur) / dt;
                if !td.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        step: n,
                        snapshot: format!("{{\"bin\":{i},\"state\":{:?}}}", x_i[0].to_f64()),
                    });
                }
                let mut grad = self.bank[i - 1].value_gradient(&x_i);
                grad.scale(real::<T>(-2.0) * td);
                self.bank[i - 1]
                    .sgd_step(&grad, rho_critic)
                    .map_err(|_| Error::NonFiniteGradient { step: n })?;
                self.bin_states[i - 1] = next0.expect("batch ≥ 1");
                self.last_bin_actions.push((i, true, a_i));
            } else {
                // Off-cell: act with the shared actor, only move the state.
                let a = self.actor.sample(&x_i, &mut self.rng_actions);
                let z: Vec<T> = (0..nd).map(|_| T::std_normal(&mut self.rng_env)).collect();
                let clipped = self.env.step_deterministic(&x_i, &a, &z, &mut next);
                if clipped {
                    self.clip_events += 1;
                }
                self.bin_states[i - 1] = next.clone();
                self.last_bin_actions.push((i, false, a));
            }
            let new_state = self.bin_states[i - 1].clone();
            self.bin_measures[i - 1].update(&new_state, rho_measure)?;
        }

        // Individual path: actor training against the min-critic values.
        let local_mean = self.measure.mean()?;
        let (pol_mean, pol_std) = self.actor.mean_std(&self.state);
        let zs = antithetic_normals::<T, _>(m_batch * k, &mut self.rng_actions);
        let actions: Vec<Vec<T>> = (0..m_batch)
            .map(|b| {
                (0..k)
                    .map(|a| pol_mean[a] + pol_std[a] * zs[b * k + a])
                    .collect()
            })
            .collect();
        let noise = antithetic_normals::<T, _>(m_batch * nd, &mut self.rng_env);
        let v_cur = self.min_value_buffered(&self.state, &mut scratch);
        let mut tds = Vec::with_capacity(m_batch);
        let mut next0: Option<Vec<T>> = None;
        for (b, a) in actions.iter().enumerate() {
            let cost = self
                .env
                .cost_rate(&self.state, a, self.mean_args(&local_mean, &slow_mean))
                * dt;
            let clipped =
                self.env
                    .step_deterministic(&self.state, a, &noise[b * nd..(b + 1) * nd], &mut next);
            if clipped {
                self.clip_events += 1;
            }
            let td = normalized_td(cost, self.min_value_buffered(&next, &mut scratch), v_cur, gamma, dt);
            if !td.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step: n,
                    snapshot: self.snapshot_json(),
                });
            }
            tds.push(td);
            if b == 0 {
                next0 = Some(next.clone());
            }
        }
        let next0 = next0.expect("batch ≥ 1");
        let weights: Vec<T> = tds.iter().map(|&t| t / real(m_batch as f64)).collect();
        let actor_grad = self
            .actor
            .log_prob_grad_weighted(&self.state, &actions, &weights);
        self.actor
            .sgd_step(&actor_grad, self.rates.actor.rate(n))
            .map_err(|_| Error::NonFiniteGradient { step: n })?;

        self.state = next0;
        self.measure.update(&self.state.clone(), rho_measure)?;
        if let Some(slow) = &mut self.slow_measure {
            let rho_slow = self
                .rates
                .measure_slow
                .as_ref()
                .expect("slow measure requires a slow schedule")
                .rate(n);
            // μ̃ ← μ̃ − ρ̃(μ̃ − δ_{X'}): the slow measure relaxes toward its
            // own atoms so it stays a probability measure.
            slow.update(&self.state, rho_slow)?;
        }
        self.step_index += 1;
        Ok(())
    }

    /// Serialized trainer state for post-mortems on aborted runs.
    pub fn snapshot_json(&self) -> String {
        #[derive(Serialize)]
        struct Snapshot<'a, T, C> {
            step: u64,
            state: &'a [T],
            bin_states: &'a [Vec<T>],
            actor_params: Vec<T>,
            bank: &'a [C],
            clip_events: u64,
        }
        serde_json::to_string(&Snapshot {
            step: self.step_index,
            state: &self.state,
            bin_states: &self.bin_states,
            actor_params: self.actor.flatten(),
            bank: &self.bank,
            clip_events: self.clip_events,
        })
        .unwrap_or_else(|e| format!("{{\"error\":\"{e}\"}}"))
    }
}
