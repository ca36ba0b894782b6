//! Continuous Lyapunov energies along flow trajectories.
//!
//! First order: `E^λ(t) = t(Ψ_t(x(t)) − Ψ_t(x*)) + (λ/2)‖x(t) − x*‖²` with
//! `λ > 1`; its dissipation rate is controlled by
//! `ζ(t) = (λ−1)ε(t) − t·ε̇(t)`.
//!
//! Second order: `E^λ(t) = t²(Ψ_t(x(t)) − Ψ_t(x*))
//! + ½‖λ(x(t) − x*) + t·ẋ(t)‖² + (λ(α−1−λ)/2)‖x(t) − x*‖²` with
//! `λ ∈ (2, α−1)`.
//!
//! Energies are evaluated pointwise on the sampled trajectory; a companion
//! finite-difference derivative series supports monotonicity inspection
//! without storing dense trajectories.

use ndarray::Array1;

use crate::core::{BilevelProblem, CoreError, Schedule};

use super::{FlowConfig, FlowError, FlowOrder, FlowTrace};

/// `ζ(t) = (λ−1)ε(t) − t·ε̇(t)`, the weight multiplying the outer gap in the
/// first-order continuous dissipation inequality.
pub fn zeta_continuous(sched: &Schedule, lambda: f64, t: f64) -> Result<f64, CoreError> {
    let eps = sched.epsilon_continuous(t)?;
    let deps = sched.epsilon_continuous_derivative(t)?;
    Ok((lambda - 1.0) * eps - t * deps)
}

/// Lyapunov energy sampled along a trajectory.
#[derive(Debug, Clone)]
pub struct EnergySeries {
    pub ts: Vec<f64>,
    pub energy: Vec<f64>,
    /// Finite-difference derivative of the energy (centered in the interior,
    /// one-sided at the ends); same length as `ts`.
    pub derivative: Vec<f64>,
}

impl EnergySeries {
    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }
}

/// Evaluate the order-matching energy along `trace`.
///
/// Needs the solution oracle `x*`; the second-order energy additionally needs
/// velocities stored in the trace and `λ ∈ (2, α−1)`.
pub fn continuous_lyapunov(
    prob: &BilevelProblem,
    cfg: &FlowConfig,
    trace: &FlowTrace,
    lambda: f64,
) -> Result<EnergySeries, FlowError> {
    let x_star = prob
        .oracle
        .as_ref()
        .and_then(|o| o.x_star.as_ref())
        .ok_or_else(|| {
            FlowError::MissingOracle("the continuous energy needs the solution x*".into())
        })?;
    match cfg.order {
        FlowOrder::First => {
            if !(lambda > 1.0) {
                return Err(FlowError::InvalidConfig(format!(
                    "first-order energy needs lambda > 1, got {lambda}"
                )));
            }
        }
        FlowOrder::Second => {
            if !(lambda > 2.0 && lambda < cfg.alpha - 1.0) {
                return Err(FlowError::InvalidConfig(format!(
                    "second-order energy needs lambda in (2, alpha-1) = (2, {}), got {lambda}",
                    cfg.alpha - 1.0
                )));
            }
        }
    }

    let sched = Schedule { t0: cfg.t0, ..cfg.sched };
    let mut ts = Vec::with_capacity(trace.len());
    let mut energy = Vec::with_capacity(trace.len());
    for r in &trace.records {
        let eps = sched.epsilon_continuous(r.t)?;
        let gap = prob.regularized_value(eps, &r.x) - prob.regularized_value(eps, x_star);
        let diff = &r.x - x_star;
        let d2 = diff.dot(&diff);
        let e = match cfg.order {
            FlowOrder::First => r.t * gap + 0.5 * lambda * d2,
            FlowOrder::Second => {
                let v = r.v.as_ref().ok_or_else(|| {
                    FlowError::InvalidConfig(
                        "second-order energy needs velocities stored in the trace".into(),
                    )
                })?;
                let w: Array1<f64> = &diff * lambda + &(v * r.t);
                r.t * r.t * gap
                    + 0.5 * w.dot(&w)
                    + 0.5 * lambda * (cfg.alpha - 1.0 - lambda) * d2
            }
        };
        ts.push(r.t);
        energy.push(e);
    }

    let derivative = finite_difference(&ts, &energy);
    Ok(EnergySeries { ts, energy, derivative })
}

/// Derivative estimates on a nonuniform grid: centered differences in the
/// interior, one-sided at the ends, zero for singleton series.
fn finite_difference(ts: &[f64], vs: &[f64]) -> Vec<f64> {
    let n = ts.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut out = Vec::with_capacity(n);
    out.push((vs[1] - vs[0]) / (ts[1] - ts[0]));
    for i in 1..n - 1 {
        out.push((vs[i + 1] - vs[i - 1]) / (ts[i + 1] - ts[i - 1]));
    }
    out.push((vs[n - 1] - vs[n - 2]) / (ts[n - 1] - ts[n - 2]));
    out
}
