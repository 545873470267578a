//! Positivity-preserving simulation of a generalized Ait-Sahalia rate model
//! with Poisson jumps.
//!
//! The process solves
//!
//! ```text
//! dX = (a_{-1} X^{-1} - a_0 + a_1 X - a_2 X^gamma) dt + b X^theta dW + phi(X_-) dN
//! ```
//!
//! on the positive half-line. The crate provides:
//!
//! * [`model`] — coefficients, parameter validation, regime classification
//!   and the one-sided Lipschitz constant governing the implicit stepsize;
//! * [`noise`] — reproducible Brownian/Poisson increments on a dyadic grid
//!   with exact coarsening, so all stepsizes share one driving path;
//! * [`rootfind`] — the bracketed Newton solve behind each implicit step;
//! * [`scheme`] — the drift-implicit backward Euler map (positivity
//!   preserving) and the explicit Euler-Maruyama map (for comparison);
//! * [`experiment`] — Monte Carlo harness for strong-error/convergence-rate
//!   measurement, negative-path censuses and moment probes.
//!
//! Everything numeric is generic over the scalar type through [`Real`];
//! the `*F64` aliases below cover the common case.

pub mod error;
pub mod experiment;
pub mod model;
pub mod noise;
pub mod rootfind;
pub mod scalar;
pub mod scheme;

pub use error::{Error, Result};
pub use experiment::{fit_rate, moment_probe, negative_census, strong_error};
pub use experiment::{ErrorMode, ExperimentSpec, PositivityCensus, RateReport};
pub use model::{
    classify_regime, critical_step_bound, diffusion, drift, monotonicity_constant,
    theorem_step_bound, JumpKind, JumpSpec, ModelParams, Regime, DEFAULT_Q,
};
pub use noise::{coarsen, generate, GridConfig, NoiseGrid};
pub use rootfind::{solve, solve_default, ImplicitStepProblem};
pub use scalar::Real;
pub use scheme::{bem_step, em_step, simulate_path, simulate_with_increments};
pub use scheme::{PathResult, SchemeKind};

/// Double-precision instantiations of the core types.
pub type ModelParamsF64 = ModelParams<f64>;
pub type JumpSpecF64 = JumpSpec<f64>;
pub type GridConfigF64 = GridConfig<f64>;
pub type NoiseGridF64 = NoiseGrid<f64>;
pub type PathResultF64 = PathResult<f64>;
pub type ExperimentSpecF64 = ExperimentSpec<f64>;
pub type RateReportF64 = RateReport<f64>;
pub type ImplicitStepProblemF64 = ImplicitStepProblem<f64>;

/// Single-precision instantiations.
pub type ModelParamsF32 = ModelParams<f32>;
pub type JumpSpecF32 = JumpSpec<f32>;
pub type GridConfigF32 = GridConfig<f32>;
pub type NoiseGridF32 = NoiseGrid<f32>;
