//! Weighted ergodic averages and the best-iterate construction.
//!
//! Alongside the last iterate, the theory controls the outer value of the
//! `ζ`-weighted running average `x̄_{k,ζ} = (1/Z_{k,δ}) Σ_{ℓ=k₀}^{k} ζ_{ℓ,δ} x_ℓ`
//! and therefore of the better of the two,
//! `x_k^best = argmin{H(x_{k+1}), H(x̄_{k,ζ})}`.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::core::{BilevelProblem, Schedule};

use super::{zeta_first, zeta_second, DiagnosticsError, LyapunovParams, RunTrace};

/// Which energy's dissipation weights to average with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnergyOrder {
    First,
    Second,
}

/// Which candidate won the outer-value comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BestChoice {
    /// The iterate `x_{k+1}` itself.
    LastIterate,
    /// The weighted average `x̄_{k,ζ}`.
    Average,
}

/// Result of the best-iterate construction at index `k`.
#[derive(Debug, Clone)]
pub struct BestIterate {
    pub x_best: Array1<f64>,
    pub which: BestChoice,
    /// The weighted average `x̄_{k,ζ}`, kept for inspection.
    pub x_avg: Array1<f64>,
}

/// Convex combination `Σ w_ℓ x_ℓ / Σ w_ℓ` of the given weighted points.
pub fn zeta_weighted_average(weighted: &[(f64, &Array1<f64>)]) -> Array1<f64> {
    assert!(!weighted.is_empty(), "average of nothing");
    let dim = weighted[0].1.len();
    let mut acc = Array1::<f64>::zeros(dim);
    let mut z = 0.0;
    for (w, x) in weighted {
        acc = acc + &(*x * *w);
        z += *w;
    }
    assert!(z > 0.0, "weights must sum to something positive");
    acc / z
}

/// Form `x̄_{k,ζ}` from the stored iterates `x_{k₀}..x_k` and pick the
/// `H`-smaller of it and `x_{k+1}`. Needs full iterate storage up to `k+1`.
pub fn best_iterate(
    prob: &BilevelProblem,
    trace: &RunTrace,
    sched: &Schedule,
    params: &LyapunovParams,
    order: EnergyOrder,
    k0: usize,
    k: usize,
) -> Result<BestIterate, DiagnosticsError> {
    if k0 < 1 || k < k0 {
        return Err(DiagnosticsError::InvalidParams(format!(
            "need 1 ≤ k0 ≤ k, got k0 = {k0}, k = {k}"
        )));
    }
    let fetch = |i: usize| {
        trace.iterate(i).ok_or_else(|| {
            DiagnosticsError::NeedsFullStorage(format!(
                "best-iterate construction needs the iterate at k = {i}"
            ))
        })
    };
    let mut weighted = Vec::with_capacity(k - k0 + 1);
    for ell in k0..=k {
        let w = match order {
            EnergyOrder::First => zeta_first(sched, params, ell),
            EnergyOrder::Second => zeta_second(sched, params, ell),
        };
        weighted.push((w, fetch(ell)?));
    }
    let x_avg = zeta_weighted_average(&weighted);
    let x_next = fetch(k + 1)?;
    let (x_best, which) = if prob.outer_value(x_next) <= prob.outer_value(&x_avg) {
        (x_next.clone(), BestChoice::LastIterate)
    } else {
        (x_avg.clone(), BestChoice::Average)
    };
    Ok(BestIterate { x_best, which, x_avg })
}
