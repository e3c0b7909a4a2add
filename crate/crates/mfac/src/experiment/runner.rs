//! Execute one configured run and write its artifact files.

use super::config::{ExperimentConfig, RunMode};
use super::io::{mlp_to_text, policy_to_text, write_atomic};
use crate::agents::{run_training, TrainResult};
use crate::analytic::AnalyticSolution;
use crate::approximators::PolicyArch;
use crate::error::{Error, Result};
use crate::idealized::{
    idealized_iterate, trace_to_csv, IdealizedMode, IdealizedRates, IdealizedResult,
    IdealizedState, OuChainModel, RandomGridModel,
};
use crate::scalar::Scalar;
use std::path::{Path, PathBuf};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MFAC_OUT_DIR";

/// Paths of everything a run wrote.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub summary: PathBuf,
    pub files: Vec<PathBuf>,
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    if let Some(out) = &cfg.out {
        return PathBuf::from(out);
    }
    let base = std::env::var(OUT_DIR_ENV).unwrap_or_else(|_| "runs".into());
    PathBuf::from(base).join(format!("{}-seed{}", cfg.mode, cfg.seed))
}

/// Run the configured pipeline and write JSON summary, CSV traces,
/// histogram, control/value curves and parameter checkpoints.
pub fn run(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    match cfg.mode {
        RunMode::IdealizedMfg | RunMode::IdealizedMfc => run_idealized(cfg),
        _ => run_sampled(cfg),
    }
}

fn run_sampled(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let result: TrainResult<f64> = run_training(cfg)?;
    let dir = out_dir(cfg);
    let mut files = Vec::new();

    let echo = cfg.to_toml();
    let config_path = dir.join("config.toml");
    write_atomic(&config_path, &echo)?;
    files.push(config_path);

    // metric trace
    let mut trace = String::from("step,e_mu,e_alpha,e_V\n");
    for row in &result.traces {
        trace.push_str(&format!(
            "{},{},{},{}\n",
            row.step, row.e_mu, row.e_alpha, row.e_value
        ));
    }
    let trace_path = dir.join("trace.csv");
    write_atomic(&trace_path, &trace)?;
    files.push(trace_path);

    // histogram of the learned measure
    let hist_path = dir.join("histogram.csv");
    write_atomic(&hist_path, &result.measure.to_csv())?;
    files.push(hist_path);
    if let Some(slow) = &result.slow_measure {
        let p = dir.join("histogram_global.csv");
        write_atomic(&p, &slow.to_csv())?;
        files.push(p);
    }
    if let Some(partition) = &result.partition {
        let p = dir.join("bins.csv");
        write_atomic(&p, &partition.to_csv())?;
        files.push(p);
    }

    // control and value curves over the analytic support
    let (curve_ctrl, curve_val) = curves(&result);
    let p = dir.join("control_curve.csv");
    write_atomic(&p, &curve_ctrl)?;
    files.push(p);
    let p = dir.join("value_curve.csv");
    write_atomic(&p, &curve_val)?;
    files.push(p);

    // parameter checkpoints
    let arch = PolicyArch {
        trunk_width: cfg.actor_trunk_width,
        head_width: cfg.actor_head_width,
        std_floor: cfg.std_floor,
        init_std: cfg.init_std,
    };
    let p = dir.join("actor.txt");
    write_atomic(&p, &policy_to_text(&result.actor, &arch))?;
    files.push(p);
    if result.critics.len() == 1 {
        let p = dir.join("critic.txt");
        write_atomic(&p, &mlp_to_text(&result.critics[0]))?;
        files.push(p);
    } else {
        for (i, c) in result.critics.iter().enumerate() {
            let p = dir.join(format!("critic_{:03}.txt", i + 1));
            write_atomic(&p, &mlp_to_text(c))?;
            files.push(p);
        }
    }

    // summary
    let summary = summary_json(cfg, &result, &echo);
    let summary_path = dir.join("summary.json");
    write_atomic(&summary_path, &summary)?;
    Ok(RunArtifacts {
        dir,
        summary: summary_path,
        files,
    })
}

fn summary_json(cfg: &ExperimentConfig, r: &TrainResult<f64>, echo: &str) -> String {
    #[derive(serde::Serialize)]
    struct Summary<'a> {
        mode: String,
        seed: u64,
        steps: u64,
        report: &'a crate::metrics::MetricReport<f64>,
        learned_mean: &'a [f64],
        analytic: &'a AnalyticSolution<f64>,
        warnings: &'a [String],
        wall_clock_s: f64,
        clip_events: u64,
        config_echo: &'a str,
    }
    serde_json::to_string_pretty(&Summary {
        mode: cfg.mode.to_string(),
        seed: r.seed,
        steps: r.steps,
        report: &r.report,
        learned_mean: &r.learned_mean,
        analytic: &r.analytic,
        warnings: &r.warnings,
        wall_clock_s: r.wall_clock_s,
        clip_events: r.clip_events,
        config_echo: echo,
    })
    .expect("summary serializes")
}

fn curves(result: &TrainResult<f64>) -> (String, String) {
    match &result.analytic {
        AnalyticSolution::OneD(sol) => {
            let mut ctrl = String::from("x,alpha_learned,alpha_analytic\n");
            let mut val = String::from("x,v_learned,v_analytic\n");
            let s = sol.std_dev();
            let n = 201;
            for k in 0..n {
                let x = sol.mean - 4.0 * s + 8.0 * s * (k as f64) / (n - 1) as f64;
                let a = result.actor.mean_action(&[x])[0];
                ctrl.push_str(&format!("{x},{a},{}\n", sol.control(x)));
                val.push_str(&format!("{x},{},{}\n", result.value_at(&[x]), sol.value(x)));
            }
            (ctrl, val)
        }
        AnalyticSolution::TwoD(sol) => {
            let mut ctrl = String::from("x1,x2,a1_learned,a2_learned,a1_analytic,a2_analytic\n");
            let mut val = String::from("x1,x2,v_learned,v_analytic\n");
            let s1 = sol.covariance[0][0].sqrt();
            let s2 = sol.covariance[1][1].sqrt();
            let n = 21;
            for i in 0..n {
                for j in 0..n {
                    let x1 = sol.mean[0] - 3.0 * s1 + 6.0 * s1 * (i as f64) / (n - 1) as f64;
                    let x2 = sol.mean[1] - 3.0 * s2 + 6.0 * s2 * (j as f64) / (n - 1) as f64;
                    let x = [x1, x2];
                    let a = result.actor.mean_action(&x);
                    let aa = sol.control(&x);
                    ctrl.push_str(&format!("{x1},{x2},{},{},{},{}\n", a[0], a[1], aa[0], aa[1]));
                    val.push_str(&format!(
                        "{x1},{x2},{},{}\n",
                        result.value_at(&x),
                        sol.value(&x)
                    ));
                }
            }
            (ctrl, val)
        }
    }
}

fn run_idealized(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let mode = match cfg.mode {
        RunMode::IdealizedMfg => IdealizedMode::Mfg,
        RunMode::IdealizedMfc => IdealizedMode::Mfc,
        _ => unreachable!(),
    };
    let iters = cfg.idealized_iters.unwrap_or(cfg.steps);
    let preset = cfg.preset.as_deref().unwrap_or("grid5x3-random");
    let rates = idealized_rates(cfg, mode)?;
    let result = match preset {
        "grid5x3-random" => {
            let model: RandomGridModel<f64> = RandomGridModel::shipped_5x3();
            let state = IdealizedState::uniform(&model);
            idealized_iterate(state, &model, &rates, mode, iters, cfg.checkpoint)?
        }
        "ou6-chain" => {
            let model: OuChainModel<f64> = OuChainModel::shipped_6();
            let state = IdealizedState::uniform(&model);
            idealized_iterate(state, &model, &rates, mode, iters, cfg.checkpoint)?
        }
        other => {
            return Err(Error::Config(format!(
                "unknown idealized preset '{other}' (grid5x3-random | ou6-chain)"
            )))
        }
    };
    write_idealized_artifacts(cfg, &result)
}

fn idealized_rates<T: Scalar>(cfg: &ExperimentConfig, mode: IdealizedMode) -> Result<IdealizedRates<T>> {
    let defaults = match mode {
        IdealizedMode::Mfg => IdealizedRates::mfg_defaults(),
        IdealizedMode::Mfc => IdealizedRates::mfc_defaults(),
    };
    let Some(rc) = &cfg.rates else {
        return Ok(defaults);
    };
    let pick = |v: Option<f64>, d: crate::agents::Schedule<T>| -> crate::agents::Schedule<T> {
        match v {
            Some(r) => crate::agents::Schedule::constant(crate::scalar::real(r)),
            None => d,
        }
    };
    Ok(IdealizedRates {
        measure: pick(rc.mu, defaults.measure),
        critic: pick(rc.v, defaults.critic),
        actor: pick(rc.pi, defaults.actor),
    })
}

fn write_idealized_artifacts(
    cfg: &ExperimentConfig,
    result: &IdealizedResult<f64>,
) -> Result<RunArtifacts> {
    let dir = out_dir(cfg);
    let mut files = Vec::new();
    let echo = cfg.to_toml();
    let p = dir.join("config.toml");
    write_atomic(&p, &echo)?;
    files.push(p);
    let p = dir.join("residuals.csv");
    write_atomic(&p, &trace_to_csv(&result.trace))?;
    files.push(p);
    #[derive(serde::Serialize)]
    struct Summary<'a> {
        mode: String,
        iters: u64,
        final_measure_residual: f64,
        final_critic_grad_norm: f64,
        final_actor_grad_norm: f64,
        projection_events: u64,
        config_echo: &'a str,
    }
    let summary = serde_json::to_string_pretty(&Summary {
        mode: cfg.mode.to_string(),
        iters: cfg.idealized_iters.unwrap_or(cfg.steps),
        final_measure_residual: result.final_row.measure_residual,
        final_critic_grad_norm: result.final_row.critic_grad_norm,
        final_actor_grad_norm: result.final_row.actor_grad_norm,
        projection_events: result.state.projection_events,
        config_echo: &echo,
    })
    .expect("summary serializes");
    let summary_path = dir.join("summary.json");
    write_atomic(&summary_path, &summary)?;
    Ok(RunArtifacts {
        dir,
        summary: summary_path,
        files,
    })
}
