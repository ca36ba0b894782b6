//! Continuous-time Tikhonov gradient flows.
//!
//! The discrete solvers approximate two dynamical systems driven by the
//! regularized objective `Ψ_t = f + ε(t)h` with `ε(t) = c/t^δ`:
//!
//! * first order: `ẋ(t) + ∇f(x(t)) + ε(t)∇h(x(t)) = 0`,
//! * second order: `ẍ(t) + (α/t)ẋ(t) + ∇f(x(t)) + ε(t)∇h(x(t)) = 0`, `α > 3`.
//!
//! Both are integrated with classical fixed-step fourth-order Runge-Kutta on
//! smooth problems (no prox parts), sampled on a logarithmic time grid. The
//! continuous Lyapunov energies mirror their discrete counterparts and come
//! with finite-difference derivative series for monotonicity inspection.

mod energy;
mod integrate;

pub use energy::{continuous_lyapunov, zeta_continuous, EnergySeries};
pub use integrate::{
    integrate_first_flow, integrate_flow, integrate_second_flow, FlowConfig, FlowMeta,
    FlowOrder, FlowRecord, FlowTrace, SAMPLES_PER_DECADE,
};

use crate::core::CoreError;

/// Errors from flow integration and continuous diagnostics.
#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    /// The vector fields are only defined when both prox parts vanish.
    #[error("flow fields need a smooth problem: {0}")]
    NonSmoothProblem(String),
    /// A config field violates its documented bound.
    #[error("invalid flow config: {0}")]
    InvalidConfig(String),
    /// A diagnostic needs oracle data the problem does not carry.
    #[error("missing oracle data: {0}")]
    MissingOracle(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}
