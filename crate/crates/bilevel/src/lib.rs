//! Solvers and diagnostics for simple bilevel convex optimization.
//!
//! The problem class: minimize an outer objective `H = h + ĥ` over the set of
//! minimizers of an inner objective `F = f + f̂`, where `f`, `h` are smooth
//! convex with Lipschitz gradients and `f̂`, `ĥ` are proper closed convex with
//! computable proximal maps. All methods here follow the vanishing Tikhonov
//! (viscosity) approach: at iteration `k` they take a proximal-gradient step on
//! `F + ε_k·H` with `ε_k = c/(k+β)^δ` decaying to zero, so the outer objective
//! acts as a slowly fading selection pressure on the inner solution set.
//!
//! Modules:
//! - [`core`]: objective terms, prox library, regularization schedules, problem container
//! - [`algorithms`]: the solvers (plain and accelerated Tikhonov proximal-gradient plus
//!   three published baselines) behind one driver
//! - [`diagnostics`]: run traces, Lyapunov energies and dissipation checks, rate fits,
//!   ergodic/best iterates, growth verification
//! - [`problems`]: built-in benchmark instances with exact or reference oracles
//! - [`flows`]: the continuous-time limits (first and second order ODEs) via RK4
//! - [`harness`]: config-driven experiment runner (CSV traces, manifests, reports)
//!   backing the `bilevel` command-line binary

pub mod algorithms;
pub mod core;
pub mod diagnostics;
pub mod flows;
pub mod harness;
pub mod problems;
