//! Actor-critic learning for infinite-horizon mean field games (MFG), mean
//! field control (MFC) and mean field control games (MFCG) in continuous
//! state and action spaces.
//!
//! The crate provides
//! - hand-differentiated approximators (tanh MLPs, a Gaussian policy, linear
//!   critics) trained with plain SGD,
//! - online empirical-measure estimation with exponential forgetting and the
//!   state×action bin partition used by the control-side algorithms,
//! - the three single-trajectory training loops (game, control, control
//!   game) driven by per-variable learning-rate schedules,
//! - closed-form linear-quadratic solutions in 1D plus a semi-analytic 2D
//!   solver, used as ground truth by the error metrics,
//! - a deterministic exact-expectation iteration on finite grids mirroring
//!   the sampled loops, for noise-free convergence checks,
//! - an experiment runner with reproducible seeds and CSV/JSON exports.
//!
//! The numerical core is generic over the scalar type via [`Scalar`];
//! concrete `f64` aliases live at the crate root.

pub mod agents;
pub mod analytic;
pub mod approximators;
pub mod environment;
pub mod error;
pub mod experiment;
pub mod idealized;
pub mod linalg;
pub mod measures;
pub mod metrics;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{real, Scalar};

/// Default scalar type of the shipped benchmarks and the CLI.
pub type Real = f64;

pub type Mlp64 = approximators::Mlp<f64>;
pub type GaussianPolicy64 = approximators::GaussianPolicy<f64>;
pub type LinearCritic64 = approximators::LinearCritic<f64>;
pub type EmpiricalMeasure64 = measures::EmpiricalMeasure<f64>;
pub type BinPartition64 = measures::BinPartition<f64>;
pub type LqModel1D64 = environment::LqModel1D<f64>;
pub type LqModel2D64 = environment::LqModel2D<f64>;
pub type MfcgModel64 = environment::MfcgModel<f64>;
