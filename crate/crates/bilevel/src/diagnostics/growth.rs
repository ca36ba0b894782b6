//! Hölder growth verification around the inner solution set.
//!
//! The outer rate statements assume the inner objective grows at least like
//! a power of the distance to its argmin:
//! `(τ/ρ)·dist(x, argmin F)^ρ ≤ F(x) − min F` with `ρ ∈ (1, 2]`. A useful
//! consequence bounds how far the outer value can drop below its constrained
//! optimum in terms of the inner residual:
//! `H(x*) − H(x) ≤ ‖p*‖·((F(x) − F(x*))/(τ/ρ))^{1/ρ}`
//! for a suitable dual vector `p*`. Both are checked pointwise at supplied
//! samples.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::core::BilevelProblem;

use super::DiagnosticsError;

/// Pointwise audit of the growth assumption and its outer-gap consequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthReport {
    /// Smallest observed `(F(x) − min F) / ((τ/ρ)·dist^ρ)`; the assumption
    /// demands ≥ 1.
    pub worst_ratio: f64,
    /// Samples with ratio < 1.
    pub violations: usize,
    /// Samples entering the ratio (those at positive distance).
    pub samples_used: usize,
    /// Samples sitting on the argmin, skipped (`0 ≤ 0` holds trivially).
    pub samples_skipped: usize,
    /// Smallest slack `RHS − LHS` of the outer-gap bound, when `p*` is
    /// available.
    pub bound_worst_slack: Option<f64>,
    /// The outer-gap bound held at every sample (vacuously true without `p*`).
    pub bound_holds: bool,
}

/// Evaluate the growth inequality (and, when the oracle ships a dual vector
/// `p*`, the outer-gap bound) at the given samples.
pub fn check_holder_growth(
    prob: &BilevelProblem,
    samples: &[Array1<f64>],
) -> Result<GrowthReport, DiagnosticsError> {
    let oracle = prob
        .oracle
        .as_ref()
        .ok_or_else(|| DiagnosticsError::MissingOracle("no oracle data attached".into()))?;
    let holder = oracle
        .holder
        .as_ref()
        .ok_or_else(|| DiagnosticsError::MissingOracle("growth parameters (rho, tau)".into()))?;
    let project = oracle.argmin_projector.as_ref().ok_or_else(|| {
        DiagnosticsError::MissingOracle("projector onto the inner argmin".into())
    })?;
    let min_inner = oracle
        .min_inner
        .ok_or_else(|| DiagnosticsError::MissingOracle("inner minimum value".into()))?;
    let modulus = holder.tau / holder.rho;

    let bound_ctx = match (&oracle.p_star, &oracle.x_star) {
        (Some(p), Some(xs)) => Some((p.dot(p).sqrt(), prob.outer_value(xs))),
        _ => None,
    };

    let mut worst_ratio = f64::INFINITY;
    let mut violations = 0usize;
    let mut used = 0usize;
    let mut skipped = 0usize;
    let mut bound_worst: Option<f64> = None;
    for x in samples {
        let proj = project(x);
        let diff = x - &proj;
        let dist = diff.dot(&diff).sqrt();
        let f_res = prob.inner_value(x) - min_inner;
        if dist < 1e-12 {
            skipped += 1;
        } else {
            used += 1;
            let ratio = f_res / (modulus * dist.powf(holder.rho));
            if ratio < 1.0 {
                violations += 1;
            }
            worst_ratio = worst_ratio.min(ratio);
        }
        if let Some((p_norm, h_star)) = bound_ctx {
            let lhs = h_star - prob.outer_value(x);
            let rhs = p_norm * (f_res.max(0.0) / modulus).powf(1.0 / holder.rho);
            let slack = rhs - lhs;
            bound_worst = Some(bound_worst.map_or(slack, |w: f64| w.min(slack)));
        }
    }
    let scale = 1e-9;
    let bound_holds = bound_worst.map_or(true, |w| w >= -scale);
    Ok(GrowthReport {
        worst_ratio,
        violations,
        samples_used: used,
        samples_skipped: skipped,
        bound_worst_slack: bound_worst,
        bound_holds,
    })
}
