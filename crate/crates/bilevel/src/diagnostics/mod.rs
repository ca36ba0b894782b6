//! Lyapunov energies, dissipation checks, rate fitting, and geometry probes.
//!
//! The analysis machinery that certifies what a run actually did: evaluating
//! the discrete Lyapunov energies along a trace, checking the per-step
//! dissipation inequalities they satisfy, fitting log-log convergence slopes,
//! forming weighted ergodic averages and best iterates, and verifying Hölder
//! growth of the inner objective around its solution set.

mod ergodic;
mod growth;
mod lyapunov;
mod rates;
mod trace;

pub use ergodic::{best_iterate, zeta_weighted_average, BestChoice, BestIterate, EnergyOrder};
pub use growth::{check_holder_growth, GrowthReport};
pub use lyapunov::{
    check_dissipation_first, check_dissipation_second, lyapunov_first, lyapunov_second,
    zeta_first, zeta_second, DissipationReport, LyapunovParams,
};
pub use rates::{fit_loglog, fit_rate, RateFit};
pub use trace::{RunTrace, StoragePolicy, TraceField, TraceMeta, TraceRecord};

use crate::core::CoreError;

/// Errors from the analysis layer.
#[derive(Debug, thiserror::Error)]
pub enum DiagnosticsError {
    /// The requested quantity needs oracle data the problem does not carry.
    #[error("missing oracle data: {0}")]
    MissingOracle(String),
    /// A parameter lies outside the admissible range of the requested
    /// quantity.
    #[error("invalid diagnostic parameters: {0}")]
    InvalidParams(String),
    /// Log-log fitting needs strictly positive values.
    #[error("non-positive value {value} at k={k} in series {field}")]
    NonPositiveValues { field: String, k: usize, value: f64 },
    /// The requested window selects fewer than two points.
    #[error("window [{lo}, {hi}] selects fewer than two trace points")]
    EmptyWindow { lo: usize, hi: usize },
    /// The trace was thinned; per-iterate analysis needs full storage.
    #[error("trace stores only thinned iterates: {0}")]
    NeedsFullStorage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}
