//! Experiment configuration: flat key-value TOML with one nesting level for
//! the learning-rate schedules and optional inline model coefficients.
//!
//! ```toml
//! mode = "mfg"              # mfg | mfc | mfcg | idealized-mfg | idealized-mfc
//! preset = "lq1d-paper"     # or an inline [model] table
//! steps = 200000
//! seed = 42
//! bins_state = 6            # control-side runs; total state cells m
//! bins_action = 7           # total action cells l
//! batch = 16
//! checkpoint = 1000
//! out = "runs/mfg-demo"
//!
//! [rates]
//! mode = "constant"         # constant | poly
//! mu = 1e-5
//! v = 1e-4
//! pi = 5e-5
//! ```

use crate::agents::{Rates, Schedule};
use crate::environment::{LqModel1D, LqModel2D, MfcgModel};
use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};
use serde::{Deserialize, Serialize};

/// Which pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Mfg,
    Mfc,
    Mfcg,
    IdealizedMfg,
    IdealizedMfc,
}

impl std::fmt::Display for RunMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RunMode::Mfg => "mfg",
            RunMode::Mfc => "mfc",
            RunMode::Mfcg => "mfcg",
            RunMode::IdealizedMfg => "idealized-mfg",
            RunMode::IdealizedMfc => "idealized-mfc",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for RunMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mfg" => Ok(RunMode::Mfg),
            "mfc" => Ok(RunMode::Mfc),
            "mfcg" => Ok(RunMode::Mfcg),
            "idealized-mfg" => Ok(RunMode::IdealizedMfg),
            "idealized-mfc" => Ok(RunMode::IdealizedMfc),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

/// Inline model coefficients (alternative to a named preset).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InlineModel {
    Lq1d {
        c1: f64,
        c2: f64,
        c3: f64,
        c4: f64,
        c5: f64,
        sigma: f64,
        beta: f64,
        dt: f64,
    },
    Lq2d {
        c1: [[f64; 2]; 2],
        c2: [[f64; 2]; 2],
        c3: [[f64; 2]; 2],
        c4: [f64; 2],
        c5: [[f64; 2]; 2],
        sigma: [[f64; 2]; 2],
        beta: f64,
        dt: f64,
    },
    Mfcg {
        c1: f64,
        c2: f64,
        c3: f64,
        c4: f64,
        c5: f64,
        ct1: f64,
        ct2: f64,
        ct5: f64,
        sigma: f64,
        beta: f64,
        dt: f64,
    },
}

/// A resolved model in `f64` coefficients.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    Lq1D(LqModel1D<f64>),
    Lq2D(LqModel2D<f64>),
    Mfcg(MfcgModel<f64>),
}

impl LqModel1D<f64> {
    pub fn cast<T: Scalar>(&self) -> LqModel1D<T> {
        LqModel1D {
            c1: real(self.c1),
            c2: real(self.c2),
            c3: real(self.c3),
            c4: real(self.c4),
            c5: real(self.c5),
            sigma: real(self.sigma),
            beta: real(self.beta),
            dt: real(self.dt),
            state_clip: real(self.state_clip),
        }
    }
}

impl LqModel2D<f64> {
    pub fn cast<T: Scalar>(&self) -> LqModel2D<T> {
        let m = |a: &[[f64; 2]; 2]| [[real(a[0][0]), real(a[0][1])], [real(a[1][0]), real(a[1][1])]];
        LqModel2D {
            c1: m(&self.c1),
            c2: m(&self.c2),
            c3: m(&self.c3),
            c4: [real(self.c4[0]), real(self.c4[1])],
            c5: m(&self.c5),
            sigma: m(&self.sigma),
            beta: real(self.beta),
            dt: real(self.dt),
            state_clip: real(self.state_clip),
        }
    }
}

impl MfcgModel<f64> {
    pub fn cast<T: Scalar>(&self) -> MfcgModel<T> {
        MfcgModel {
            base: self.base.cast(),
            ct1: real(self.ct1),
            ct2: real(self.ct2),
            ct5: real(self.ct5),
        }
    }
}

/// Learning-rate block of the configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    #[serde(default = "default_rate_mode")]
    pub mode: String,
    pub mu: Option<f64>,
    pub v: Option<f64>,
    pub pi: Option<f64>,
    /// Slow global-measure rate (control game).
    pub tilde: Option<f64>,
    /// Empirical-average warm-up on the measure schedules.
    pub warmup: Option<bool>,
    #[serde(default = "default_kappa_mu")]
    pub kappa_mu: f64,
    #[serde(default = "default_kappa_pi")]
    pub kappa_pi: f64,
    #[serde(default = "default_kappa_v")]
    pub kappa_v: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_rate_mode() -> String {
    "constant".into()
}
fn default_kappa_mu() -> f64 {
    0.9
}
fn default_kappa_pi() -> f64 {
    0.7
}
fn default_kappa_v() -> f64 {
    0.55
}
fn default_tau() -> f64 {
    10_000.0
}

impl Default for RatesConfig {
    fn default() -> Self {
        Self {
            mode: default_rate_mode(),
            mu: None,
            v: None,
            pi: None,
            tilde: None,
            warmup: None,
            kappa_mu: default_kappa_mu(),
            kappa_pi: default_kappa_pi(),
            kappa_v: default_kappa_v(),
            tau: default_tau(),
        }
    }
}

/// Full experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: RunMode,
    pub preset: Option<String>,
    pub model: Option<InlineModel>,
    #[serde(default = "default_steps")]
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bins_state")]
    pub bins_state: usize,
    #[serde(default = "default_bins_action")]
    pub bins_action: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_checkpoint")]
    pub checkpoint: u64,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub rates: Option<RatesConfig>,
    #[serde(default = "default_metric_samples")]
    pub metric_samples: usize,
    #[serde(default = "default_trace_samples")]
    pub trace_samples: usize,
    #[serde(default = "default_critic_width")]
    pub critic_width: usize,
    #[serde(default = "default_trunk_width")]
    pub actor_trunk_width: usize,
    #[serde(default = "default_head_width")]
    pub actor_head_width: usize,
    #[serde(default = "default_std_floor")]
    pub std_floor: f64,
    #[serde(default = "default_init_std")]
    pub init_std: f64,
    #[serde(default = "default_init_state_std")]
    pub init_state_std: f64,
    /// Idealized-mode iteration count (defaults to `steps` when absent).
    #[serde(default)]
    pub idealized_iters: Option<u64>,
    /// Safety clip per state coordinate. Defaults per mode: control-side
    /// runs clip at the bin-region edge (the critics only ever train inside
    /// the region), game runs at one unit beyond it.
    #[serde(default)]
    pub state_clip: Option<f64>,
}

fn default_steps() -> u64 {
    200_000
}
fn default_bins_state() -> usize {
    6
}
fn default_bins_action() -> usize {
    7
}
fn default_batch() -> usize {
    16
}
fn default_checkpoint() -> u64 {
    1000
}
fn default_metric_samples() -> usize {
    10_000
}
fn default_trace_samples() -> usize {
    1000
}
fn default_critic_width() -> usize {
    128
}
fn default_trunk_width() -> usize {
    64
}
fn default_head_width() -> usize {
    64
}
fn default_std_floor() -> f64 {
    1e-5
}
fn default_init_std() -> f64 {
    0.1
}
fn default_init_state_std() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn new(mode: RunMode, preset: &str) -> Self {
        Self {
            mode,
            preset: Some(preset.to_string()),
            model: None,
            steps: default_steps(),
            seed: 0,
            bins_state: default_bins_state(),
            bins_action: default_bins_action(),
            batch: default_batch(),
            checkpoint: default_checkpoint(),
            out: None,
            rates: None,
            metric_samples: default_metric_samples(),
            trace_samples: default_trace_samples(),
            critic_width: default_critic_width(),
            actor_trunk_width: default_trunk_width(),
            actor_head_width: default_head_width(),
            std_floor: default_std_floor(),
            init_std: default_init_std(),
            init_state_std: default_init_state_std(),
            idealized_iters: None,
            state_clip: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Resolve the model: named preset or inline coefficients.
    pub fn model(&self) -> Result<ModelSpec> {
        match (&self.preset, &self.model) {
            (Some(_), Some(_)) => Err(Error::Config(
                "give either a preset or inline model coefficients, not both".into(),
            )),
            (Some(name), None) => match name.as_str() {
                "lq1d-paper" => Ok(ModelSpec::Lq1D(LqModel1D::paper_preset())),
                "lq2d-paper" => Ok(ModelSpec::Lq2D(LqModel2D::paper_preset())),
                "mfcg-default" => Ok(ModelSpec::Mfcg(MfcgModel::default_preset())),
                other => Err(Error::Config(format!("unknown preset '{other}'"))),
            },
            (None, Some(inline)) => Ok(match inline {
                InlineModel::Lq1d {
                    c1,
                    c2,
                    c3,
                    c4,
                    c5,
                    sigma,
                    beta,
                    dt,
                } => ModelSpec::Lq1D(LqModel1D::new([*c1, *c2, *c3, *c4, *c5], *sigma, *beta, *dt)),
                InlineModel::Lq2d {
                    c1,
                    c2,
                    c3,
                    c4,
                    c5,
                    sigma,
                    beta,
                    dt,
                } => ModelSpec::Lq2D(LqModel2D {
                    c1: *c1,
                    c2: *c2,
                    c3: *c3,
                    c4: *c4,
                    c5: *c5,
                    sigma: *sigma,
                    beta: *beta,
                    dt: *dt,
                    state_clip: crate::environment::DEFAULT_STATE_CLIP,
                }),
                InlineModel::Mfcg {
                    c1,
                    c2,
                    c3,
                    c4,
                    c5,
                    ct1,
                    ct2,
                    ct5,
                    sigma,
                    beta,
                    dt,
                } => ModelSpec::Mfcg(MfcgModel::new(
                    LqModel1D::new([*c1, *c2, *c3, *c4, *c5], *sigma, *beta, *dt),
                    *ct1,
                    *ct2,
                    *ct5,
                )),
            }),
            (None, None) => {
                // mode-appropriate default preset
                match self.mode {
                    RunMode::Mfcg => Ok(ModelSpec::Mfcg(MfcgModel::default_preset())),
                    _ => Ok(ModelSpec::Lq1D(LqModel1D::paper_preset())),
                }
            }
        }
    }

    /// Default learning rates for the mode (the benchmark table), overridden
    /// by the `[rates]` block where present.
    pub fn rates<T: Scalar>(&self) -> Result<Rates<T>> {
        let control_side = matches!(self.mode, RunMode::Mfc | RunMode::Mfcg | RunMode::IdealizedMfc);
        let defaults: Rates<T> = match self.mode {
            RunMode::Mfg | RunMode::IdealizedMfg => Rates::mfg_defaults(),
            RunMode::Mfc | RunMode::IdealizedMfc => Rates::mfc_defaults(),
            RunMode::Mfcg => Rates::mfcg_defaults(),
        };
        let Some(rc) = &self.rates else {
            return Ok(defaults);
        };
        let poly = match rc.mode.as_str() {
            "constant" => false,
            "poly" | "polynomial" => true,
            other => return Err(Error::Config(format!("unknown schedule mode '{other}'"))),
        };
        let warmup = rc.warmup.unwrap_or(!poly);
        let mu = rc.mu.unwrap_or(defaults.measure.rho0.to_f64().unwrap());
        let v = rc.v.unwrap_or(defaults.critic.rho0.to_f64().unwrap());
        let pi = rc.pi.unwrap_or(defaults.actor.rho0.to_f64().unwrap());
        for (name, r) in [("mu", mu), ("v", v), ("pi", pi)] {
            if !(r > 0.0) {
                return Err(Error::Config(format!("rate '{name}' must be positive, got {r}")));
            }
        }
        let mk = |rho0: f64, kappa: f64, warm: bool| -> Schedule<T> {
            if poly {
                Schedule::polynomial(real(rho0), real(kappa), real(rc.tau)).with_warmup(warm)
            } else {
                Schedule::constant(real(rho0)).with_warmup(warm)
            }
        };
        let measure_slow = if matches!(self.mode, RunMode::Mfcg) {
            let tilde = rc.tilde.unwrap_or(1e-5);
            if !(tilde > 0.0) {
                return Err(Error::Config(format!(
                    "rate 'tilde' must be positive, got {tilde}"
                )));
            }
            Some(mk(tilde, rc.kappa_mu, warmup))
        } else {
            None
        };
        let _ = control_side;
        Ok(Rates {
            actor: mk(pi, rc.kappa_pi, false),
            critic: mk(v, rc.kappa_v, false),
            measure: mk(mu, rc.kappa_mu, warmup),
            measure_slow,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch < 1 {
            return Err(Error::Config("batch must be ≥ 1".into()));
        }
        if self.bins_state < 1 || self.bins_action < 1 {
            return Err(Error::Config("bin counts must be ≥ 1".into()));
        }
        if !(self.std_floor > 0.0) {
            return Err(Error::Config("std floor must be positive".into()));
        }
        if !(self.init_std > 0.0) {
            return Err(Error::Config("initial std must be positive".into()));
        }
        // γ ∈ (0,1) ⟺ β·Δt > 0 for the resolved model
        let (beta, dt) = match self.model()? {
            ModelSpec::Lq1D(m) => (m.beta, m.dt),
            ModelSpec::Lq2D(m) => (m.beta, m.dt),
            ModelSpec::Mfcg(m) => (m.base.beta, m.base.dt),
        };
        if !(beta > 0.0 && dt > 0.0) {
            return Err(Error::Config("need β > 0 and Δt > 0 so γ ∈ (0,1)".into()));
        }
        let _ = self.rates::<f64>()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_toml() {
        let cfg = ExperimentConfig::from_toml(
            r#"
mode = "mfg"
preset = "lq1d-paper"
steps = 1000
seed = 7
"#,
        )
        .unwrap();
        assert_eq!(cfg.mode, RunMode::Mfg);
        assert_eq!(cfg.steps, 1000);
        assert_eq!(cfg.batch, 16);
        cfg.validate().unwrap();
        let rates = cfg.rates::<f64>().unwrap();
        assert_eq!(rates.actor.rho0, 5e-5);
        assert_eq!(rates.critic.rho0, 1e-4);
        assert_eq!(rates.measure.rho0, 1e-5);
        assert!(rates.measure.warmup);
    }

    #[test]
    fn rates_block_overrides() {
        let cfg = ExperimentConfig::from_toml(
            r#"
mode = "mfc"
preset = "lq1d-paper"

[rates]
mode = "constant"
mu = 1e-2
warmup = false
"#,
        )
        .unwrap();
        let rates = cfg.rates::<f64>().unwrap();
        assert_eq!(rates.measure.rho0, 1e-2);
        assert!(!rates.measure.warmup);
        assert_eq!(rates.actor.rho0, 5e-5); // default kept
    }

    #[test]
    fn inline_model_roundtrip() {
        let cfg = ExperimentConfig::from_toml(
            r#"
mode = "mfg"
steps = 10

[model]
kind = "lq1d"
c1 = 0.25
c2 = 1.5
c3 = 0.5
c4 = 0.6
c5 = 1.0
sigma = 0.3
beta = 1.0
dt = 0.01
"#,
        )
        .unwrap();
        match cfg.model().unwrap() {
            ModelSpec::Lq1D(m) => assert_eq!(m.c2, 1.5),
            _ => panic!("wrong model kind"),
        }
        let echoed = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&echoed).unwrap();
        assert_eq!(back.steps, 10);
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(ExperimentConfig::from_toml("mode = \"warp\"").is_err());
        let cfg = ExperimentConfig::from_toml(
            r#"
mode = "mfg"
preset = "lq1d-paper"
[rates]
mu = -1.0
"#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
        let mut cfg2 = ExperimentConfig::new(RunMode::Mfg, "nope");
        assert!(cfg2.validate().is_err());
        cfg2.preset = Some("lq1d-paper".into());
        cfg2.batch = 0;
        assert!(cfg2.validate().is_err());
    }
}
