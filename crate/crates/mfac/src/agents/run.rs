//! Dispatch from an experiment configuration to a full training run with
//! metric traces.

use super::{BinTrainer, BinTrainerConfig, MfgTrainer, MfgTrainerConfig, Rates};
use crate::analytic::{
    solve_lq_2d, solve_mfc_1d, solve_mfcg_1d, solve_mfg_1d, AnalyticSolution, ProblemTag,
};
use crate::approximators::{Activation, GaussianPolicy, Mlp, PolicyArch, ValueApproximator};
use crate::environment::{LqModel1D, LqModel2D, MfcgModel};
use crate::error::{Error, Result};
use crate::experiment::config::{ExperimentConfig, ModelSpec, RunMode};
use crate::measures::{BinPartition, EmpiricalMeasure};
use crate::metrics::{error_alpha, error_mu, error_value, LimitSampler, MetricReport};
use crate::scalar::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// One metric-trace checkpoint.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceRow<T> {
    pub step: u64,
    pub e_mu: T,
    pub e_alpha: T,
    pub e_value: T,
}

/// Everything a finished run hands back.
pub struct TrainResult<T> {
    pub mode: RunMode,
    pub seed: u64,
    pub steps: u64,
    pub actor: GaussianPolicy<T>,
    /// One critic for game runs, the full bank for control-side runs.
    pub critics: Vec<Mlp<T>>,
    pub partition: Option<BinPartition<T>>,
    pub measure: EmpiricalMeasure<T>,
    pub bin_measures: Vec<EmpiricalMeasure<T>>,
    pub slow_measure: Option<EmpiricalMeasure<T>>,
    pub learned_mean: Vec<T>,
    pub analytic: AnalyticSolution<T>,
    pub report: MetricReport<T>,
    pub traces: Vec<TraceRow<T>>,
    pub warnings: Vec<String>,
    pub wall_clock_s: f64,
    pub clip_events: u64,
}

impl<T: Scalar> TrainResult<T> {
    /// Value read-out: single critic for game runs, min-critic composite for
    /// control-side runs.
    pub fn value_at(&self, x: &[T]) -> T {
        match &self.partition {
            None => self.critics[0].value(x),
            Some(p) => {
                let j = p.state_cell_of(x);
                p.bins_of_state_cell(j)
                    .map(|i| self.critics[i - 1].value(x))
                    .fold(T::infinity(), |a, b| a.min(b))
            }
        }
    }
}

fn limit_sampler<'a, T: Scalar>(analytic: &'a AnalyticSolution<T>) -> LimitSampler<'a, T> {
    match analytic {
        AnalyticSolution::OneD(a) => LimitSampler::OneD(a),
        AnalyticSolution::TwoD(a) => LimitSampler::TwoD(a),
    }
}

fn metric_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00e7_a100);
    rng.set_stream(step.wrapping_add(1));
    rng
}

struct Probe<'a, T> {
    analytic: &'a AnalyticSolution<T>,
    seed: u64,
    samples: usize,
}

impl<'a, T: Scalar> Probe<'a, T> {
    fn evaluate(
        &self,
        step: u64,
        learned_mean: &[T],
        actor: &GaussianPolicy<T>,
        value_fn: impl Fn(&[T]) -> T,
        l: usize,
    ) -> TraceRow<T> {
        let sampler = limit_sampler(self.analytic);
        let analytic_mean: Vec<T> = match self.analytic {
            AnalyticSolution::OneD(a) => vec![a.mean],
            AnalyticSolution::TwoD(a) => a.mean.to_vec(),
        };
        let mut rng = metric_rng(self.seed, step);
        let e_alpha = error_alpha(actor, &sampler, l, &mut rng);
        let e_value = error_value(value_fn, &sampler, l, &mut rng);
        TraceRow {
            step,
            e_mu: error_mu(learned_mean, &analytic_mean),
            e_alpha,
            e_value,
        }
    }
}

fn build_actor<T: Scalar>(state_dim: usize, action_dim: usize, cfg: &ExperimentConfig) -> GaussianPolicy<T> {
    let arch = PolicyArch {
        trunk_width: cfg.actor_trunk_width,
        head_width: cfg.actor_head_width,
        std_floor: cfg.std_floor,
        init_std: cfg.init_std,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0x5eed_1001);
    GaussianPolicy::new(state_dim, action_dim, &arch, &mut rng)
}

fn build_critic<T: Scalar>(state_dim: usize, cfg: &ExperimentConfig) -> Mlp<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0x5eed_1002);
    // Zero output layer: the value read-out starts identically zero, so
    // early TD errors carry only real costs instead of the random net's
    // phantom slopes.
    Mlp::new_zero_output(
        &[state_dim, cfg.critic_width, 1],
        Activation::Tanh,
        Activation::Identity,
        &mut rng,
    )
}

/// Pessimistic initial level for control-side critic banks: an upper
/// estimate of the value scale over the truncated region,
/// `max f · Δt/(1−γ)`. The min-critic read-out otherwise treats
/// under-trained critics (which start low) as cheap and steers the actor
/// toward ignorance; starting the bank above the true values makes the min
/// select trained estimates.
fn pessimistic_value_level<T, E>(env: &E, partition: &BinPartition<T>) -> T
where
    T: Scalar,
    E: crate::environment::MfEnv<T>,
{
    use crate::environment::MeanArgs;
    let d = env.state_dim();
    let lo_cell = partition.state_cell(1);
    let hi_cell = partition.state_cell(partition.n_state_cells());
    let mut corners: Vec<Vec<T>> = vec![Vec::new()];
    for a in 0..d {
        let lo = lo_cell.lo[a];
        let hi = hi_cell.hi[a];
        let mid = (lo + hi) / crate::scalar::real::<T>(2.0);
        corners = corners
            .into_iter()
            .flat_map(|base| {
                [lo, mid, hi].into_iter().map(move |v| {
                    let mut b = base.clone();
                    b.push(v);
                    b
                })
            })
            .collect();
    }
    let mut f_max = T::zero();
    for x in &corners {
        for i in 1..=partition.n_bins() {
            let a = partition.midpoint_action(i);
            for m1 in &corners {
                for m2 in &corners {
                    let f = env.cost_rate(x, &a, MeanArgs::local_global(m1, m2));
                    if f > f_max {
                        f_max = f;
                    }
                }
            }
        }
    }
    f_max * env.dt() / (T::one() - env.gamma())
}

fn partition_for<T: Scalar>(state_dim: usize, action_dim: usize, cfg: &ExperimentConfig) -> Result<BinPartition<T>> {
    let per_axis = |total: usize, d: usize, what: &str| -> Result<Vec<usize>> {
        if d == 1 {
            return Ok(vec![total]);
        }
        let root = (total as f64).powf(1.0 / d as f64).round() as usize;
        if root.pow(d as u32) != total {
            return Err(Error::Config(format!(
                "{what} bin count {total} is not a perfect {d}-th power"
            )));
        }
        Ok(vec![root; d])
    };
    BinPartition::default_region(
        state_dim,
        action_dim,
        per_axis(cfg.bins_state, state_dim, "state")?,
        per_axis(cfg.bins_action, action_dim, "action")?,
    )
}

/// Run the configured training loop for `N` steps, recording metric traces
/// every checkpoint, and evaluate the final metric report.
pub fn run_training<T: Scalar>(cfg: &ExperimentConfig) -> Result<TrainResult<T>> {
    cfg.validate()?;
    let start = Instant::now();
    let rates: Rates<T> = cfg.rates()?;
    let cadence = cfg.checkpoint.max(1);

    // Control-side paths only generate critic updates inside the bin
    // region, so their safety clip sits at the region edge; game runs keep
    // a one-unit margin.
    let bin_clip = 2.0;
    let game_clip = crate::environment::DEFAULT_STATE_CLIP;
    match (cfg.mode, cfg.model()?) {
        (RunMode::Mfg, ModelSpec::Lq1D(mut m)) => {
            m.state_clip = cfg.state_clip.unwrap_or(game_clip);
            let model: LqModel1D<T> = m.cast();
            let analytic = AnalyticSolution::OneD(solve_mfg_1d(&model)?);
            run_mfg(cfg, model, analytic, rates, cadence, start)
        }
        (RunMode::Mfg, ModelSpec::Lq2D(mut m)) => {
            m.state_clip = cfg.state_clip.unwrap_or(game_clip);
            let model: LqModel2D<T> = m.cast();
            let analytic = AnalyticSolution::TwoD(solve_lq_2d(&model, ProblemTag::Mfg)?);
            run_mfg(cfg, model, analytic, rates, cadence, start)
        }
        (RunMode::Mfc, ModelSpec::Lq1D(mut m)) => {
            m.state_clip = cfg.state_clip.unwrap_or(bin_clip);
            let model: LqModel1D<T> = m.cast();
            let analytic = AnalyticSolution::OneD(solve_mfc_1d(&model)?);
            run_bins(cfg, model, analytic, rates, cadence, start, false)
        }
        (RunMode::Mfc, ModelSpec::Lq2D(mut m)) => {
            m.state_clip = cfg.state_clip.unwrap_or(bin_clip);
            let model: LqModel2D<T> = m.cast();
            let analytic = AnalyticSolution::TwoD(solve_lq_2d(&model, ProblemTag::Mfc)?);
            run_bins(cfg, model, analytic, rates, cadence, start, false)
        }
        (RunMode::Mfcg, ModelSpec::Mfcg(mut m)) => {
            m.base.state_clip = cfg.state_clip.unwrap_or(bin_clip);
            let model: MfcgModel<T> = m.cast();
            let analytic = AnalyticSolution::OneD(solve_mfcg_1d(&model)?);
            run_bins(cfg, model, analytic, rates, cadence, start, true)
        }
        (mode, _) => Err(Error::Config(format!(
            "mode {mode} does not match the configured model (or is an idealized mode; use the experiment runner)"
        ))),
    }
}

fn run_mfg<T, E>(
    cfg: &ExperimentConfig,
    env: E,
    analytic: AnalyticSolution<T>,
    rates: Rates<T>,
    cadence: u64,
    start: Instant,
) -> Result<TrainResult<T>>
where
    T: Scalar,
    E: crate::environment::MfEnv<T>,
{
    let mut warnings = rates.ordering_warnings(false);
    for w in &warnings {
        log::warn!("{w}");
    }
    let actor = build_actor(env.state_dim(), env.action_dim(), cfg);
    let critic = build_critic(env.state_dim(), cfg);
    let tcfg = MfgTrainerConfig {
        rates,
        batch: cfg.batch,
        seed: cfg.seed,
        init_state_std: crate::scalar::real(cfg.init_state_std),
    };
    let mut trainer = MfgTrainer::new(env, actor, critic, &tcfg);
    let probe = Probe {
        analytic: &analytic,
        seed: cfg.seed,
        samples: cfg.trace_samples,
    };
    let mut traces = Vec::new();
    for n in 0..cfg.steps {
        trainer.step()?;
        if (n + 1) % cadence == 0 {
            traces.push(probe.evaluate(
                n + 1,
                &trainer.measure.mean()?,
                &trainer.actor,
                |x| trainer.critic.value(x),
                probe.samples,
            ));
        }
    }
    let learned_mean = trainer.measure.mean()?;
    let final_row = probe.evaluate(
        cfg.steps,
        &learned_mean,
        &trainer.actor,
        |x| trainer.critic.value(x),
        cfg.metric_samples,
    );
    let tag = match &analytic {
        AnalyticSolution::OneD(a) => a.tag,
        AnalyticSolution::TwoD(a) => a.tag,
    };
    let report = MetricReport {
        e_mu: final_row.e_mu,
        e_alpha: final_row.e_alpha,
        e_value: final_row.e_value,
        samples: cfg.metric_samples,
        seed: cfg.seed,
        tag,
    };
    if !report.is_finite() {
        warnings.push("final metrics are non-finite".into());
    }
    Ok(TrainResult {
        mode: cfg.mode,
        seed: cfg.seed,
        steps: cfg.steps,
        actor: trainer.actor,
        critics: vec![trainer.critic],
        partition: None,
        measure: trainer.measure,
        bin_measures: Vec::new(),
        slow_measure: None,
        learned_mean,
        analytic,
        report,
        traces,
        warnings,
        wall_clock_s: start.elapsed().as_secs_f64(),
        clip_events: trainer.clip_events,
    })
}

fn run_bins<T, E>(
    cfg: &ExperimentConfig,
    env: E,
    analytic: AnalyticSolution<T>,
    rates: Rates<T>,
    cadence: u64,
    start: Instant,
    control_game: bool,
) -> Result<TrainResult<T>>
where
    T: Scalar,
    E: crate::environment::MfEnv<T>,
{
    let mut rates = rates;
    if control_game && rates.measure_slow.is_none() {
        rates.measure_slow = Rates::<T>::mfcg_defaults().measure_slow;
    }
    if !control_game {
        rates.measure_slow = None;
    }
    let mut warnings = rates.ordering_warnings(true);
    for w in &warnings {
        log::warn!("{w}");
    }
    let partition = partition_for(env.state_dim(), env.action_dim(), cfg)?;
    let actor = build_actor(env.state_dim(), env.action_dim(), cfg);
    let mut critic = build_critic(env.state_dim(), cfg);
    critic.nudge_output_bias(0, pessimistic_value_level(&env, &partition));
    let tcfg = BinTrainerConfig {
        rates,
        batch: cfg.batch,
        seed: cfg.seed,
        init_state_std: crate::scalar::real(cfg.init_state_std),
    };
    let mut trainer = BinTrainer::new(env, partition, actor, critic, &tcfg);
    let probe = Probe {
        analytic: &analytic,
        seed: cfg.seed,
        samples: cfg.trace_samples,
    };
    let mut traces = Vec::new();
    for n in 0..cfg.steps {
        trainer.step()?;
        if (n + 1) % cadence == 0 {
            let mean = trainer.measure.mean()?;
            let row = {
                let t = &trainer;
                probe.evaluate(n + 1, &mean, &t.actor, |x| t.min_value(x), probe.samples)
            };
            traces.push(row);
        }
    }
    let learned_mean = trainer.measure.mean()?;
    let final_row = {
        let t = &trainer;
        probe.evaluate(
            cfg.steps,
            &learned_mean,
            &t.actor,
            |x| t.min_value(x),
            cfg.metric_samples,
        )
    };
    let tag = match &analytic {
        AnalyticSolution::OneD(a) => a.tag,
        AnalyticSolution::TwoD(a) => a.tag,
    };
    let report = MetricReport {
        e_mu: final_row.e_mu,
        e_alpha: final_row.e_alpha,
        e_value: final_row.e_value,
        samples: cfg.metric_samples,
        seed: cfg.seed,
        tag,
    };
    if !report.is_finite() {
        warnings.push("final metrics are non-finite".into());
    }
    Ok(TrainResult {
        mode: cfg.mode,
        seed: cfg.seed,
        steps: cfg.steps,
        actor: trainer.actor,
        critics: trainer.bank,
        partition: Some(trainer.partition),
        measure: trainer.measure,
        bin_measures: trainer.bin_measures,
        slow_measure: trainer.slow_measure,
        learned_mean,
        analytic,
        report,
        traces,
        warnings,
        wall_clock_s: start.elapsed().as_secs_f64(),
        clip_events: trainer.clip_events,
    })
}
