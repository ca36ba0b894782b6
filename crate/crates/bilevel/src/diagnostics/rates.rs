//! Log-log rate fitting.
//!
//! Convergence statements of the form `value = o(k^{−r})` are quantified on
//! finite runs by least-squares fitting `log(value)` against `log(k)` over a
//! window and reading off the slope. A fitted slope at or below `−r` with
//! high `r²` is the desk-scale certificate; genuine little-o behavior only
//! shows up as slopes strictly beyond the exponent.

use super::{DiagnosticsError, RunTrace, TraceField};

/// Least-squares line through `(log k, log value)`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination of the log-log fit.
    pub r2: f64,
    /// Number of points in the window.
    pub points: usize,
}

/// Fit a power law to strictly positive `(x, value)` pairs (all > 0).
pub fn fit_loglog(pairs: &[(f64, f64)]) -> RateFit {
    assert!(pairs.len() >= 2, "a slope needs at least two points");
    let logs: Vec<(f64, f64)> = pairs.iter().map(|(x, v)| (x.ln(), v.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|(a, _)| a).sum::<f64>() / n;
    let my = logs.iter().map(|(_, b)| b).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (a, b) in &logs {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = syy - slope * sxy;
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    RateFit { slope, intercept, r2, points: logs.len() }
}

/// Fit the decay rate of one scalar series of a trace over the inclusive
/// index window `k ∈ [window.0, window.1]` (indices below 1 are skipped:
/// `log 0` is not a thing). Values must be strictly positive.
pub fn fit_rate(
    trace: &RunTrace,
    field: TraceField,
    window: (usize, usize),
) -> Result<RateFit, DiagnosticsError> {
    let (lo, hi) = window;
    let mut pairs = Vec::new();
    for (k, v) in trace.series(field) {
        if k < lo.max(1) || k > hi {
            continue;
        }
        if v <= 0.0 {
            return Err(DiagnosticsError::NonPositiveValues {
                field: format!("{field:?}"),
                k,
                value: v,
            });
        }
        pairs.push((k as f64, v));
    }
    if pairs.len() < 2 {
        return Err(DiagnosticsError::EmptyWindow { lo, hi });
    }
    Ok(fit_loglog(&pairs))
}
