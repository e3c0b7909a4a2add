//! Per-variable learning-rate schedules.
//!
//! Two modes: `Constant` (the numerics setting) and `Polynomial`
//! `ρ_n = ρ₀(1+n/τ)^{−κ}` (the Robbins–Monro setting; κ ∈ (0.5, 1] gives
//! Σρ = ∞ and Σρ² < ∞). Measure schedules additionally support an
//! empirical-average warm-up `ρ_n = max(1/(n+1), base_n)`: the measure
//! starts as the plain running average of the visited states and hands over
//! to the configured base rate once `1/(n+1)` falls below it. A constant
//! base rate alone cannot move the population mean more than `ρ₀·N` e-folds
//! from its initialization, which at the benchmark rates is the binding
//! constraint at desk-scale step counts; the warm-up removes the constraint
//! without changing the asymptotic timescale ordering.

use crate::scalar::{real, Scalar};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    Constant,
    #[serde(alias = "poly")]
    Polynomial,
}

/// A learning-rate sequence `ρ_n`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Schedule<T> {
    pub mode: ScheduleMode,
    /// Base rate ρ₀.
    pub rho0: T,
    /// Decay exponent κ (polynomial mode).
    pub kappa: T,
    /// Offset τ (polynomial mode).
    pub tau: T,
    /// Empirical-average warm-up (measure schedules).
    pub warmup: bool,
}

impl<T: Scalar> Schedule<T> {
    pub fn constant(rho0: T) -> Self {
        Self {
            mode: ScheduleMode::Constant,
            rho0,
            kappa: T::zero(),
            tau: T::one(),
            warmup: false,
        }
    }

    /// Constant base rate with the running-average warm-up.
    pub fn constant_warmup(rho0: T) -> Self {
        Self {
            warmup: true,
            ..Self::constant(rho0)
        }
    }

    pub fn polynomial(rho0: T, kappa: T, tau: T) -> Self {
        Self {
            mode: ScheduleMode::Polynomial,
            rho0,
            kappa,
            tau,
            warmup: false,
        }
    }

    pub fn with_warmup(mut self, on: bool) -> Self {
        self.warmup = on;
        self
    }

    fn base(&self, n: u64) -> T {
        match self.mode {
            ScheduleMode::Constant => self.rho0,
            ScheduleMode::Polynomial => {
                let n = real::<T>(n as f64);
                self.rho0 * (T::one() + n / self.tau).powf(-self.kappa)
            }
        }
    }

    /// ρ_n.
    pub fn rate(&self, n: u64) -> T {
        let base = self.base(n);
        if self.warmup {
            let avg = T::one() / real::<T>(n as f64 + 1.0);
            avg.max(base)
        } else {
            base
        }
    }
}
