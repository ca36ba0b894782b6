//! Solver selection and parameter validation.

use serde::{Deserialize, Serialize};

use crate::core::{BilevelProblem, Schedule};

use super::AlgorithmError;

/// The five iterative methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Proximal gradient on the regularized objective `F + ε_k·H`.
    Bpg,
    /// Its momentum-accelerated variant with extrapolation
    /// `α_k = 1 − α/(k+γ+1)`.
    Bfpg,
    /// The accelerated variant pinned to `γ = α−1`, `c = 1`, `β = γ`;
    /// delegates to [`Method::Bfpg`] after that rewrite.
    Fbipg,
    /// Adaptive-step comparator with shrinking regularization weight `η_k`
    /// and step `θ_{k+1} = θ̃/(η_{k+1}L_∇h + L_∇f)`.
    Stabim,
    /// Two-stage comparator alternating a proximal-gradient step on the
    /// inner objective with one on the outer, `ε_k = c/(k+1)^δ`.
    Bisg2,
}

impl Method {
    /// Lowercase identifier used in file names and CSV columns.
    pub fn key(&self) -> &'static str {
        match self {
            Method::Bpg => "bpg",
            Method::Bfpg => "bfpg",
            Method::Fbipg => "fbipg",
            Method::Stabim => "stabim",
            Method::Bisg2 => "bisg2",
        }
    }

    /// Methods that extrapolate from the previous iterate.
    pub fn is_momentum(&self) -> bool {
        matches!(self, Method::Bfpg | Method::Fbipg)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

impl std::str::FromStr for Method {
    type Err = AlgorithmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bpg" => Ok(Method::Bpg),
            "bfpg" => Ok(Method::Bfpg),
            "fbipg" => Ok(Method::Fbipg),
            "stabim" => Ok(Method::Stabim),
            "bisg2" => Ok(Method::Bisg2),
            other => Err(AlgorithmError::InvalidConfig(format!(
                "unknown method {other:?} (expected bpg, bfpg, fbipg, stabim, or bisg2)"
            ))),
        }
    }
}

fn default_step_fraction() -> f64 {
    0.95
}
fn default_alpha() -> f64 {
    4.0
}
fn default_theta_tilde() -> f64 {
    0.95
}
fn default_eta0() -> f64 {
    1.0
}
fn default_eta_shrink() -> f64 {
    0.75
}

/// Full parameterization of one solver run.
///
/// `step` is θ for the unaccelerated methods and s for the accelerated ones;
/// leave it unset to take `step_fraction` of the method's largest admissible
/// step (`2/L_∇f` unaccelerated, `1/L_∇f` accelerated). The adaptive-step
/// comparator derives its own step each iteration and ignores `step`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default = "default_step_fraction")]
    pub step_fraction: f64,
    /// Momentum strength (accelerated methods only); must exceed 3.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Discrete-time offset in `α_k = 1 − α/(k+γ+1)`.
    #[serde(default)]
    pub gamma: f64,
    pub schedule: Schedule,
    pub max_iter: usize,
    #[serde(default = "default_theta_tilde")]
    pub stabim_theta_tilde: f64,
    #[serde(default = "default_eta0")]
    pub stabim_eta0: f64,
    #[serde(default = "default_eta_shrink")]
    pub stabim_eta_shrink: f64,
}

impl SolverConfig {
    pub fn new(method: Method, schedule: Schedule, max_iter: usize) -> Self {
        Self {
            method,
            step: None,
            step_fraction: default_step_fraction(),
            alpha: default_alpha(),
            gamma: 0.0,
            schedule,
            max_iter,
            stabim_theta_tilde: default_theta_tilde(),
            stabim_eta0: default_eta0(),
            stabim_eta_shrink: default_eta_shrink(),
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = Some(step);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_step_fraction(mut self, fraction: f64) -> Self {
        self.step_fraction = fraction;
        self
    }

    /// Rewrite the pinned accelerated variant into its general form
    /// (`γ := α−1`, `c := 1`, `β := α−1`, same δ and step); other methods
    /// pass through unchanged. A zero schedule stays zero.
    pub fn normalized(&self) -> Result<Self, AlgorithmError> {
        match self.method {
            Method::Fbipg => {
                let g = self.alpha - 1.0;
                let schedule = if self.schedule.is_zero() {
                    self.schedule
                } else {
                    Schedule::new(1.0, self.schedule.delta, g)?
                };
                Ok(Self { method: Method::Bfpg, gamma: g, schedule, ..self.clone() })
            }
            _ => Ok(self.clone()),
        }
    }

    /// The schedule value `ε_k` under this method's indexing convention: the
    /// two-stage comparator pins the offset to 1, all others use the
    /// configured schedule as-is.
    pub fn epsilon_at(&self, k: usize) -> f64 {
        match self.method {
            Method::Bisg2 => {
                if self.schedule.is_zero() {
                    0.0
                } else {
                    self.schedule.c / (k as f64 + 1.0).powf(self.schedule.delta)
                }
            }
            _ => self.schedule.epsilon_discrete(k),
        }
    }

    /// Check every parameter against the method's admissible ranges and the
    /// problem's Lipschitz constants.
    pub fn validate(&self, prob: &BilevelProblem) -> Result<(), AlgorithmError> {
        let bad = |msg: String| Err(AlgorithmError::InvalidConfig(msg));
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return bad(format!("step_fraction must lie in (0,1), got {}", self.step_fraction));
        }
        let l_f = prob.inner.smooth.lipschitz;
        if !(l_f > 0.0) {
            return bad("inner smooth part must carry a positive Lipschitz constant".into());
        }
        if let Some(s) = self.step {
            if !(s > 0.0) {
                return bad(format!("step must be positive, got {s}"));
            }
        }
        match self.method {
            Method::Bpg => {
                if let Some(s) = self.step {
                    if s >= 2.0 / l_f {
                        return bad(format!(
                            "step {s} violates the bound step < 2/L_∇f = {}",
                            2.0 / l_f
                        ));
                    }
                }
            }
            Method::Bfpg | Method::Fbipg => {
                if !(self.alpha > 3.0) {
                    return bad(format!("alpha must exceed 3, got {}", self.alpha));
                }
                if self.gamma < 0.0 {
                    return bad(format!("gamma must be nonnegative, got {}", self.gamma));
                }
                if let Some(s) = self.step {
                    if s >= 1.0 / l_f {
                        return bad(format!(
                            "step {s} violates the bound step < 1/L_∇f = {}",
                            1.0 / l_f
                        ));
                    }
                }
            }
            Method::Stabim => {
                if !(self.stabim_theta_tilde > 0.0 && self.stabim_theta_tilde < 1.0) {
                    return bad(format!(
                        "stabim_theta_tilde must lie in (0,1), got {}",
                        self.stabim_theta_tilde
                    ));
                }
                if !(self.stabim_eta0 > 0.0) {
                    return bad(format!(
                        "stabim_eta0 must be positive, got {}",
                        self.stabim_eta0
                    ));
                }
                if !(0.75..=1.0).contains(&self.stabim_eta_shrink) {
                    return bad(format!(
                        "stabim_eta_shrink must lie in [0.75, 1], got {}",
                        self.stabim_eta_shrink
                    ));
                }
            }
            Method::Bisg2 => {
                if !self.schedule.is_zero() {
                    if !(self.schedule.delta > 0.5 && self.schedule.delta <= 1.0) {
                        return bad(format!(
                            "two-stage method needs delta in (1/2, 1], got {}",
                            self.schedule.delta
                        ));
                    }
                    let l_h = prob.outer.smooth.lipschitz;
                    let cap = (1.0 / l_h).min(1.0);
                    if self.schedule.c > cap {
                        return bad(format!(
                            "two-stage method needs c ≤ min(1/L_∇h, 1) = {cap}, got {}",
                            self.schedule.c
                        ));
                    }
                }
                if let Some(s) = self.step {
                    if s > 1.0 / l_f {
                        return bad(format!(
                            "step {s} violates the bound step ≤ 1/L_∇f = {}",
                            1.0 / l_f
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// The step size a run will use: the explicit `step` if set, otherwise
    /// `step_fraction` of the method's largest admissible step. For the
    /// adaptive-step comparator this is its first derived step, recorded for
    /// reporting; the stepper recomputes it each iteration.
    pub fn resolved_step(&self, prob: &BilevelProblem) -> Result<f64, AlgorithmError> {
        self.validate(prob)?;
        let l_f = prob.inner.smooth.lipschitz;
        let step = match self.method {
            Method::Bpg => self.step.unwrap_or(self.step_fraction * 2.0 / l_f),
            Method::Bfpg | Method::Fbipg | Method::Bisg2 => {
                self.step.unwrap_or(self.step_fraction / l_f)
            }
            Method::Stabim => {
                let l_h = prob.outer.smooth.lipschitz;
                let eta1 = self.stabim_eta_shrink * self.stabim_eta0;
                self.stabim_theta_tilde / (eta1 * l_h + l_f)
            }
        };
        Ok(step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::one_dim_quadratics;

    fn sched() -> Schedule {
        Schedule::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn method_keys_round_trip() {
        for m in [Method::Bpg, Method::Bfpg, Method::Fbipg, Method::Stabim, Method::Bisg2] {
            assert_eq!(m.key().parse::<Method>().unwrap(), m);
        }
        assert!("newton".parse::<Method>().is_err());
        let v: Method = serde_json::from_str("\"stabim\"").unwrap();
        assert_eq!(v, Method::Stabim);
    }

    #[test]
    fn default_steps_take_the_stated_fractions() {
        let prob = one_dim_quadratics();
        let bpg = SolverConfig::new(Method::Bpg, sched(), 10);
        assert!((bpg.resolved_step(&prob).unwrap() - 0.95 * 2.0).abs() < 1e-15);
        let bfpg = SolverConfig::new(Method::Bfpg, sched(), 10);
        assert!((bfpg.resolved_step(&prob).unwrap() - 0.95).abs() < 1e-15);
    }

    #[test]
    fn step_bounds_are_enforced() {
        let prob = one_dim_quadratics();
        let too_big = SolverConfig::new(Method::Bpg, sched(), 10).with_step(2.0);
        assert!(too_big.validate(&prob).is_err());
        let ok = SolverConfig::new(Method::Bpg, sched(), 10).with_step(1.95);
        assert!(ok.validate(&prob).is_ok());
        let acc = SolverConfig::new(Method::Bfpg, sched(), 10).with_step(1.0);
        assert!(acc.validate(&prob).is_err(), "accelerated bound is strict");
        let two_stage_at_cap = SolverConfig::new(Method::Bisg2, sched(), 10).with_step(1.0);
        assert!(two_stage_at_cap.validate(&prob).is_ok(), "two-stage bound is inclusive");
    }

    #[test]
    fn momentum_parameters_are_checked() {
        let prob = one_dim_quadratics();
        let low_alpha = SolverConfig::new(Method::Bfpg, sched(), 10).with_alpha(3.0);
        assert!(low_alpha.validate(&prob).is_err());
        let neg_gamma = SolverConfig::new(Method::Bfpg, sched(), 10).with_gamma(-1.0);
        assert!(neg_gamma.validate(&prob).is_err());
    }

    #[test]
    fn two_stage_schedule_constraints() {
        let prob = one_dim_quadratics();
        let bad_delta = SolverConfig::new(Method::Bisg2, Schedule::new(1.0, 0.5, 1.0).unwrap(), 5);
        assert!(bad_delta.validate(&prob).is_err());
        // outer smooth part of the 1-D helper has L_∇h = 1, so c ≤ 1
        let bad_c = SolverConfig::new(Method::Bisg2, Schedule::new(1.5, 0.9, 1.0).unwrap(), 5);
        assert!(bad_c.validate(&prob).is_err());
        let ok = SolverConfig::new(Method::Bisg2, Schedule::new(1.0, 0.9, 1.0).unwrap(), 5);
        assert!(ok.validate(&prob).is_ok());
    }

    #[test]
    fn pinned_variant_rewrites_parameters() {
        let cfg = SolverConfig::new(Method::Fbipg, Schedule::new(7.0, 1.5, 2.0).unwrap(), 10)
            .with_alpha(4.0);
        let n = cfg.normalized().unwrap();
        assert_eq!(n.method, Method::Bfpg);
        assert_eq!(n.gamma, 3.0);
        assert_eq!(n.schedule.c, 1.0);
        assert_eq!(n.schedule.beta, 3.0);
        assert_eq!(n.schedule.delta, 1.5, "delta is kept");
        // zero schedules survive the rewrite
        let z = SolverConfig::new(Method::Fbipg, Schedule::zero(), 10).normalized().unwrap();
        assert!(z.schedule.is_zero());
    }

    #[test]
    fn two_stage_epsilon_pins_offset_to_one() {
        let cfg = SolverConfig::new(Method::Bisg2, Schedule::new(1.0, 1.0, 7.0).unwrap(), 5);
        assert!((cfg.epsilon_at(0) - 1.0).abs() < 1e-15, "ε_0 = c regardless of β");
        assert!((cfg.epsilon_at(1) - 0.5).abs() < 1e-15);
        let bpg = SolverConfig::new(Method::Bpg, Schedule::new(1.0, 1.0, 7.0).unwrap(), 5);
        assert!((bpg.epsilon_at(0) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_comparator_reports_first_derived_step() {
        let prob = one_dim_quadratics();
        let cfg = SolverConfig::new(Method::Stabim, sched(), 5);
        let s = cfg.resolved_step(&prob).unwrap();
        assert!((s - 0.95 / 1.75).abs() < 1e-15, "θ̃/(0.75·L_∇h + L_∇f)");
    }
}
