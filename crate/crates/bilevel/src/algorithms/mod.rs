//! The five iterative solvers behind a uniform stepper interface.
//!
//! All methods damp the outer objective into the inner one with a vanishing
//! weight, iterating on `Ψ_k = F + ε_k·H` where `ε_k = c/(k+β)^δ`:
//!
//! - [`Method::Bpg`]: proximal gradient on `Ψ_k`, step `θ < 2/L_∇f`.
//! - [`Method::Bfpg`]: its accelerated variant with extrapolation
//!   `α_k = 1 − α/(k+γ+1)`, `α > 3`, step `s < 1/L_∇f`.
//! - [`Method::Fbipg`]: the accelerated scheme pinned to `γ = α−1`, `c = 1`,
//!   `β = γ`; a special case kept as a named comparator.
//! - [`Method::Stabim`]: unaccelerated comparator that re-derives its step
//!   from a shrinking regularization weight each iteration.
//! - [`Method::Bisg2`]: two-stage comparator alternating inner and outer
//!   proximal-gradient steps, never needing a combined prox.
//!
//! [`run`] drives any of them for `max_iter` iterations and returns a
//! [`RunTrace`](crate::diagnostics::RunTrace) with one row per index
//! `k = 0..=max_iter`.

mod config;
mod runner;
mod stepper;

pub use config::{Method, SolverConfig};
pub use runner::{run, run_with_observer};
pub use stepper::{
    step, step_bfpg, step_bisg2, step_bpg, step_fbipg, step_stabim, SolverState,
};

use crate::core::CoreError;
use crate::diagnostics::RunTrace;

/// Errors from solver configuration and execution.
#[derive(Debug, thiserror::Error)]
pub enum AlgorithmError {
    /// A parameter violates its method's admissible range.
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    /// A proximal step failed mid-run; the rows recorded before the failure
    /// are preserved.
    #[error("iteration {at} failed: {source}")]
    StepFailed {
        at: usize,
        #[source]
        source: CoreError,
        partial: Box<RunTrace>,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}
