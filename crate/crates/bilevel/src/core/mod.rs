//! Problem building blocks: smooth terms, prox terms, composite objectives,
//! regularization schedules, and the bilevel problem container.
//!
//! A bilevel instance couples two composite objectives,
//!
//! ```math
//! min H(x) = h(x) + ĥ(x)   subject to   x ∈ argmin F(z) = f(z) + f̂(z),
//! ```
//!
//! and every solver in this crate only ever touches it through gradients of the
//! smooth parts and proximal maps of the nonsmooth parts, evaluated on the
//! Tikhonov-regularized family `Ψ_ε = F + ε·H`.

mod linalg;
mod problem;
mod prox;
mod schedule;
mod term;

pub use linalg::{jacobi_eigenvalues, power_iteration, solve_spd, Cholesky};
pub use problem::{BilevelProblem, HolderGrowth, JointProx, OracleData};
#[cfg(test)]
pub use problem::one_dim_quadratics;
pub use prox::{combined_prox, ProxTerm, ScalarPiece};
pub use schedule::Schedule;
pub use term::{CompositeObjective, SmoothTerm};

use thiserror::Error;

/// Errors from constructing or evaluating problem building blocks.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("vector has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("no closed form for the combined prox of these two terms: {0}")]
    UnsupportedProxCombination(String),
    #[error("prox domain is empty: {0}")]
    EmptyDomain(String),
    #[error("invalid problem data: {0}")]
    InvalidProblem(String),
}
