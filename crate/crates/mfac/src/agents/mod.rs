//! The single-trajectory training loops for the game, control and
//! control-game problems, plus learning-rate schedules and run plumbing.
//!
//! All three loops share the same conventions:
//! - critics approximate the discounted *cost* value function (so a trained
//!   critic is directly comparable to the closed-form `v`),
//! - TD errors are normalized by Δt (`δ̂ = (f·Δt + γV(x′) − V(x))/Δt`, the
//!   discrete Bellman residual per unit time), which makes the learning-rate
//!   semantics independent of the time discretization,
//! - group batches of size `M` average `M` sampled TD targets for the critic
//!   and `M` sampled score terms for the actor; draws are antithetic pairs.

mod bins;
mod run;
mod schedule;
mod trainer;

pub use bins::{BinTrainer, BinTrainerConfig};
pub use run::{run_training, TraceRow, TrainResult};
pub use schedule::{Schedule, ScheduleMode};
pub use trainer::{MfgTrainer, MfgTrainerConfig};

use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// The three learning rates of one run (plus the slow global-measure rate
/// for the control game).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Rates<T> {
    pub actor: Schedule<T>,
    pub critic: Schedule<T>,
    pub measure: Schedule<T>,
    /// Slow global measure (control game only).
    pub measure_slow: Option<Schedule<T>>,
}

impl<T: Scalar> Rates<T> {
    /// Benchmark game rates: ρ^Π = 5·10⁻⁵, ρ^V = 10⁻⁴, ρ^μ = 10⁻⁵.
    pub fn mfg_defaults() -> Self {
        Self {
            actor: Schedule::constant(crate::scalar::real(5e-5)),
            critic: Schedule::constant(crate::scalar::real(1e-4)),
            measure: Schedule::constant_warmup(crate::scalar::real(1e-5)),
            measure_slow: None,
        }
    }

    /// Benchmark control rates: ρ^Π = 5·10⁻⁵, ρ^V = 10⁻⁴, ρ^μ = 10⁻³.
    pub fn mfc_defaults() -> Self {
        Self {
            measure: Schedule::constant_warmup(crate::scalar::real(1e-3)),
            ..Self::mfg_defaults()
        }
    }

    /// Control-game rates: control defaults plus a slow global measure at
    /// the game measure rate 10⁻⁵.
    pub fn mfcg_defaults() -> Self {
        Self {
            measure_slow: Some(Schedule::constant_warmup(crate::scalar::real(1e-5))),
            ..Self::mfc_defaults()
        }
    }

    /// Timescale-ordering sanity check on the base rates. Game runs want
    /// ρ^μ ≤ ρ^Π ≤ ρ^V; control runs want ρ^Π ≤ ρ^V ≤ ρ^μ. Returns warning
    /// strings instead of failing: the orderings select which problem the
    /// run solves, they are not validity conditions.
    pub fn ordering_warnings(&self, control_side: bool) -> Vec<String> {
        let mut w = Vec::new();
        let (a, c, m) = (self.actor.rho0, self.critic.rho0, self.measure.rho0);
        if control_side {
            if !(a <= c && c <= m) {
                w.push(format!(
                    "control-mode rate ordering violated: expected ρ^Π ≤ ρ^V ≤ ρ^μ, got ({a}, {c}, {m})"
                ));
            }
        } else if !(m <= a && a <= c) {
            w.push(format!(
                "game-mode rate ordering violated: expected ρ^μ ≤ ρ^Π ≤ ρ^V, got ({m}, {a}, {c})"
            ));
        }
        if let Some(slow) = &self.measure_slow {
            if slow.rho0 > self.measure.rho0 {
                w.push(format!(
                    "global measure rate {} exceeds local measure rate {}",
                    slow.rho0, self.measure.rho0
                ));
            }
        }
        w
    }
}

/// Time-normalized TD error `δ̂ = (f·Δt + γ·v_next − v_cur)/Δt`.
#[inline]
pub(crate) fn normalized_td<T: Scalar>(step_cost: T, v_next: T, v_cur: T, gamma: T, dt: T) -> T {
    crate::metrics::td_error(step_cost, v_next, v_cur, gamma) / dt
}
