//! Discrete Lyapunov energies and their dissipation inequalities.
//!
//! The convergence proofs rest on energies built from the regularized
//! objective `Ψ_k = F + ε_k·H` and the discrete time `t_k = θ(k+γ)`:
//!
//! - first order (unaccelerated iterations, `θ` = step size, `λ > 1`):
//!   `E_k^λ = t_k(Ψ_{k−1}(x_k) − Ψ_{k−1}(x*)) + (λ/2)‖x_k − x*‖²`
//! - second order (momentum iterations, `θ = √s`, `λ ∈ (2, α−1)`):
//!   `E_k^λ = t_k²(Ψ_{k−1}(x_k) − Ψ_{k−1}(x*))
//!          + ½‖λ(x_{k−1} − x*) + t_k(x_k − x_{k−1})/θ‖²
//!          + (λ(α−1−λ)/2)‖x_{k−1} − x*‖²`
//!
//! Each energy dissipates at a rate controlled by the weight
//! `ζ_{k,δ}` multiplying the outer gap; the checkers evaluate both sides of
//! the corresponding inequality along a recorded trace and report the first
//! index from which it holds, never asserting it globally (the theory only
//! guarantees it for all sufficiently large `k`).

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::core::{BilevelProblem, Schedule};

use super::{DiagnosticsError, RunTrace};

/// Parameters of the discrete energies.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LyapunovParams {
    /// Energy weight; `λ > 1` first order, `λ ∈ (2, α−1)` second order.
    pub lambda: f64,
    /// Time scale of `t_k = θ(k+γ)`: the step size itself for first-order
    /// energies, `√s` for second-order ones.
    pub theta: f64,
    /// Index offset in `t_k`.
    pub gamma: f64,
    /// Momentum strength, used by second-order terms only.
    pub alpha: f64,
}

impl LyapunovParams {
    /// First-order defaults: `λ = 2`, `t_k = θ(k+γ)` with `θ` the step size.
    pub fn first_order(step: f64, gamma: f64) -> Self {
        Self { lambda: 2.0, theta: step, gamma, alpha: f64::NAN }
    }

    /// Second-order defaults: `θ = √s` and `λ` the midpoint of `(2, α−1)`.
    pub fn second_order(step: f64, alpha: f64, gamma: f64) -> Self {
        Self { lambda: (2.0 + (alpha - 1.0)) / 2.0, theta: step.sqrt(), gamma, alpha }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// Discrete time `t_k = θ(k+γ)`.
    pub fn t_k(&self, k: usize) -> f64 {
        self.theta * (k as f64 + self.gamma)
    }

    fn require_first(&self) -> Result<(), DiagnosticsError> {
        if self.lambda > 1.0 {
            Ok(())
        } else {
            Err(DiagnosticsError::InvalidParams(format!(
                "first-order energy needs lambda > 1, got {}",
                self.lambda
            )))
        }
    }

    fn require_second(&self) -> Result<(), DiagnosticsError> {
        if self.lambda > 2.0 && self.lambda < self.alpha - 1.0 {
            Ok(())
        } else {
            Err(DiagnosticsError::InvalidParams(format!(
                "second-order energy needs lambda in (2, alpha−1) = (2, {}), got {}",
                self.alpha - 1.0,
                self.lambda
            )))
        }
    }
}

fn solution(prob: &BilevelProblem) -> Result<&Array1<f64>, DiagnosticsError> {
    prob.oracle
        .as_ref()
        .and_then(|o| o.x_star.as_ref())
        .ok_or_else(|| DiagnosticsError::MissingOracle("solution point x* is required".into()))
}

fn sq_norm(v: &Array1<f64>) -> f64 {
    v.dot(v)
}

/// First-order energy `E_k^λ` at iterate `x_k`, `k ≥ 1`.
pub fn lyapunov_first(
    prob: &BilevelProblem,
    sched: &Schedule,
    params: &LyapunovParams,
    k: usize,
    x_k: &Array1<f64>,
) -> Result<f64, DiagnosticsError> {
    params.require_first()?;
    assert!(k >= 1, "the energy is indexed from k = 1");
    let xs = solution(prob)?;
    let eps = sched.epsilon_discrete(k - 1);
    let gap = prob.regularized_value(eps, x_k) - prob.regularized_value(eps, xs);
    let d = x_k - xs;
    Ok(params.t_k(k) * gap + 0.5 * params.lambda * sq_norm(&d))
}

/// Second-order energy `E_k^λ` at the pair `(x_k, x_{k−1})`, `k ≥ 1`.
pub fn lyapunov_second(
    prob: &BilevelProblem,
    sched: &Schedule,
    params: &LyapunovParams,
    k: usize,
    x_k: &Array1<f64>,
    x_km1: &Array1<f64>,
) -> Result<f64, DiagnosticsError> {
    params.require_second()?;
    assert!(k >= 1, "the energy is indexed from k = 1");
    let xs = solution(prob)?;
    let eps = sched.epsilon_discrete(k - 1);
    let gap = prob.regularized_value(eps, x_k) - prob.regularized_value(eps, xs);
    let t = params.t_k(k);
    let anchor = (x_km1 - xs) * params.lambda + (x_k - x_km1) * (t / params.theta);
    let tail = params.lambda * (params.alpha - 1.0 - params.lambda) / 2.0;
    Ok(t * t * gap + 0.5 * sq_norm(&anchor) + tail * sq_norm(&(x_km1 - xs)))
}

/// First-order dissipation weight
/// `ζ_{k,δ} = θ(λ−1)ε_k − t_k(ε_k − ε_{k−1})`.
pub fn zeta_first(sched: &Schedule, params: &LyapunovParams, k: usize) -> f64 {
    assert!(k >= 1);
    let (e_k, e_km1) = (sched.epsilon_discrete(k), sched.epsilon_discrete(k - 1));
    params.theta * (params.lambda - 1.0) * e_k - params.t_k(k) * (e_k - e_km1)
}

/// Second-order dissipation weight
/// `ζ_{k,δ} = θ((λ−2)t_k + θ(λ−1))ε_k − t_k²(ε_k − ε_{k−1})`.
pub fn zeta_second(sched: &Schedule, params: &LyapunovParams, k: usize) -> f64 {
    assert!(k >= 1);
    let (e_k, e_km1) = (sched.epsilon_discrete(k), sched.epsilon_discrete(k - 1));
    let t = params.t_k(k);
    params.theta * ((params.lambda - 2.0) * t + params.theta * (params.lambda - 1.0)) * e_k
        - t * t * (e_k - e_km1)
}

/// Outcome of a dissipation check along a trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DissipationReport {
    /// Checked indices (a contiguous range of `k`).
    pub ks: Vec<usize>,
    /// `RHS − LHS` of the inequality at each checked index; nonnegative
    /// (within tolerance) means the inequality held there.
    pub slack: Vec<f64>,
    /// Energy `E_k` at each checked index.
    pub energy: Vec<f64>,
    /// Smallest checked index from which the inequality holds at every later
    /// checked index; `None` if it fails even at the end.
    pub k0: Option<usize>,
}

impl DissipationReport {
    fn from_parts(ks: Vec<usize>, slack: Vec<f64>, energy: Vec<f64>) -> Self {
        let mut k0 = None;
        for i in (0..ks.len()).rev() {
            let tol = 1e-9 * (1.0 + energy[i].abs());
            if slack[i] >= -tol {
                k0 = Some(ks[i]);
            } else {
                break;
            }
        }
        Self { ks, slack, energy, k0 }
    }

    /// Slack at index `k`, if it was checked.
    pub fn slack_at(&self, k: usize) -> Option<f64> {
        let first = *self.ks.first()?;
        if k < first || k > *self.ks.last()? {
            return None;
        }
        Some(self.slack[k - first])
    }
}

fn full_iterates<'t>(
    trace: &'t RunTrace,
    what: &str,
) -> Result<Vec<&'t Array1<f64>>, DiagnosticsError> {
    trace
        .records
        .iter()
        .map(|r| r.x.as_ref())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| DiagnosticsError::NeedsFullStorage(what.into()))
}

/// Check `E_{k+1} − E_k + ζ_k(H(x_k) − H(x*)) ≤ −θ(λ−1)(F(x_k) − F(x*))`
/// along an unaccelerated trace, for `k = 1..len−2`. Reports per-index slack
/// and the first sustained-validity index; never asserts.
pub fn check_dissipation_first(
    prob: &BilevelProblem,
    sched: &Schedule,
    params: &LyapunovParams,
    trace: &RunTrace,
) -> Result<DissipationReport, DiagnosticsError> {
    params.require_first()?;
    let xs = solution(prob)?;
    let xs_h = prob.outer_value(xs);
    let xs_f = prob.inner_value(xs);
    let x = full_iterates(trace, "first-order dissipation check")?;
    if x.len() < 3 {
        return Err(DiagnosticsError::EmptyWindow { lo: 1, hi: x.len().saturating_sub(1) });
    }
    let mut ks = Vec::new();
    let mut slack = Vec::new();
    let mut energy = Vec::new();
    let mut e_k = lyapunov_first(prob, sched, params, 1, x[1])?;
    for k in 1..x.len() - 1 {
        let e_next = lyapunov_first(prob, sched, params, k + 1, x[k + 1])?;
        let lhs = e_next - e_k + zeta_first(sched, params, k) * (prob.outer_value(x[k]) - xs_h);
        let rhs = -params.theta * (params.lambda - 1.0) * (prob.inner_value(x[k]) - xs_f);
        ks.push(k);
        slack.push(rhs - lhs);
        energy.push(e_k);
        e_k = e_next;
    }
    Ok(DissipationReport::from_parts(ks, slack, energy))
}

/// Check the accelerated counterpart
/// `E_{k+1} − E_k + (α−1−λ)θt_{k+1}α_k‖(x_k − x_{k−1})/θ‖² + ζ_k(H(x_k) − H(x*))
///  ≤ −θ²(λ−2)k(F(x_k) − F(x*))`
/// along a momentum trace, for `k = 1..len−2`. The velocity term's sign
/// argument needs `α_k ≥ 0` (that is `k ≥ α−γ−1`); earlier indices are
/// still evaluated and simply show up in the reported `k0`.
pub fn check_dissipation_second(
    prob: &BilevelProblem,
    sched: &Schedule,
    params: &LyapunovParams,
    trace: &RunTrace,
) -> Result<DissipationReport, DiagnosticsError> {
    params.require_second()?;
    let xs = solution(prob)?;
    let xs_h = prob.outer_value(xs);
    let xs_f = prob.inner_value(xs);
    let x = full_iterates(trace, "second-order dissipation check")?;
    if x.len() < 3 {
        return Err(DiagnosticsError::EmptyWindow { lo: 1, hi: x.len().saturating_sub(1) });
    }
    let mut ks = Vec::new();
    let mut slack = Vec::new();
    let mut energy = Vec::new();
    let mut e_k = lyapunov_second(prob, sched, params, 1, x[1], x[0])?;
    for k in 1..x.len() - 1 {
        let e_next = lyapunov_second(prob, sched, params, k + 1, x[k + 1], x[k])?;
        let alpha_k = 1.0 - params.alpha / (k as f64 + params.gamma + 1.0);
        let vel = (x[k] - x[k - 1]) / params.theta;
        let velocity_term = (params.alpha - 1.0 - params.lambda)
            * params.theta
            * params.t_k(k + 1)
            * alpha_k
            * sq_norm(&vel);
        let lhs = e_next - e_k
            + velocity_term
            + zeta_second(sched, params, k) * (prob.outer_value(x[k]) - xs_h);
        let rhs = -params.theta * params.theta * (params.lambda - 2.0) * k as f64
            * (prob.inner_value(x[k]) - xs_f);
        ks.push(k);
        slack.push(rhs - lhs);
        energy.push(e_k);
        e_k = e_next;
    }
    Ok(DissipationReport::from_parts(ks, slack, energy))
}
