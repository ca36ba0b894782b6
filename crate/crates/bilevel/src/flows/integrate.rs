//! Fixed-step Runge-Kutta integration of the Tikhonov gradient flows.
//!
//! The first-order flow follows the steepest-descent field of `Ψ_t`,
//! `ẋ = −∇f(x) − ε(t)∇h(x)`; the second-order flow adds inertia with
//! vanishing damping `α/t` and is integrated in phase space,
//! `(ẋ, v̇) = (v, −(α/t)v − ∇f(x) − ε(t)∇h(x))`.
//!
//! A fixed step keeps trajectories deterministic and reproducible. Output is
//! thinned to a logarithmic time grid so multi-decade horizons produce traces
//! of a few thousand rows regardless of the integrator step.

use std::time::Instant;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::core::{BilevelProblem, Schedule};

use super::FlowError;

/// Output grid density: samples per decade of time.
pub const SAMPLES_PER_DECADE: usize = 256;

/// Which dynamical system to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowOrder {
    /// `ẋ + ∇f + ε(t)∇h = 0`.
    First,
    /// `ẍ + (α/t)ẋ + ∇f + ε(t)∇h = 0`.
    Second,
}

fn default_alpha() -> f64 {
    4.0
}

/// Trajectory specification for [`integrate_flow`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowConfig {
    pub order: FlowOrder,
    /// Damping coefficient of the second-order system; must exceed 3.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Continuous schedule `ε(t) = c/t^δ`, evaluated on `[t0, t_end]`.
    pub sched: Schedule,
    /// Start time, `t0 > 0`.
    pub t0: f64,
    /// End time, `t_end > t0`.
    pub t_end: f64,
    /// Integrator step; bounded by [`FlowConfig::max_dt`].
    pub dt: f64,
    /// Initial position `x(t0)`.
    pub x0: Array1<f64>,
    /// Initial velocity `ẋ(t0)` of the second-order system; zero when
    /// omitted, ignored by the first-order flow.
    #[serde(default)]
    pub v0: Option<Array1<f64>>,
}

impl FlowConfig {
    pub fn new(
        order: FlowOrder,
        sched: Schedule,
        t0: f64,
        t_end: f64,
        dt: f64,
        x0: Array1<f64>,
    ) -> Self {
        Self { order, alpha: default_alpha(), sched, t0, t_end, dt, x0, v0: None }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_v0(mut self, v0: Array1<f64>) -> Self {
        self.v0 = Some(v0);
        self
    }

    /// The schedule with its continuous domain anchored at this trajectory's
    /// start time, so `ε(t)` is defined for every integration time.
    fn bound_sched(&self) -> Schedule {
        Schedule { t0: self.t0, ..self.sched }
    }

    /// Stability heuristic for the integrator step:
    /// `min(0.1, 1/(10·(L_∇f + ε(t0)·L_∇h)))`.
    pub fn max_dt(&self, prob: &BilevelProblem) -> f64 {
        let eps0 = self.sched.c / self.t0.powf(self.sched.delta);
        let stiffness = prob.regularized_lipschitz(eps0);
        if stiffness > 0.0 {
            (1.0 / (10.0 * stiffness)).min(0.1)
        } else {
            0.1
        }
    }

    pub fn validate(&self, prob: &BilevelProblem) -> Result<(), FlowError> {
        if !prob.is_smooth() {
            return Err(FlowError::NonSmoothProblem(format!(
                "problem {} has a nonsmooth part; the flow fields are undefined there",
                prob.id
            )));
        }
        if self.x0.len() != prob.dimension {
            return Err(FlowError::InvalidConfig(format!(
                "x0 has length {}, problem dimension is {}",
                self.x0.len(),
                prob.dimension
            )));
        }
        if let Some(v0) = &self.v0 {
            if v0.len() != prob.dimension {
                return Err(FlowError::InvalidConfig(format!(
                    "v0 has length {}, problem dimension is {}",
                    v0.len(),
                    prob.dimension
                )));
            }
        }
        if !(self.t0 > 0.0) || !self.t0.is_finite() {
            return Err(FlowError::InvalidConfig(format!(
                "t0 must be positive, got {}",
                self.t0
            )));
        }
        if !(self.t_end > self.t0) || !self.t_end.is_finite() {
            return Err(FlowError::InvalidConfig(format!(
                "t_end must exceed t0 = {}, got {}",
                self.t0, self.t_end
            )));
        }
        if self.order == FlowOrder::Second && !(self.alpha > 3.0) {
            return Err(FlowError::InvalidConfig(format!(
                "second-order flow needs alpha > 3, got {}",
                self.alpha
            )));
        }
        let cap = self.max_dt(prob);
        if !(self.dt > 0.0) || !self.dt.is_finite() || self.dt > cap {
            return Err(FlowError::InvalidConfig(format!(
                "dt = {} violates the stability bound min(0.1, 1/(10·(L_∇f + ε(t0)·L_∇h))) = {cap}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// One sampled point of a trajectory.
#[derive(Debug, Clone)]
pub struct FlowRecord {
    pub t: f64,
    pub x: Array1<f64>,
    /// Velocity sample; present for second-order trajectories.
    pub v: Option<Array1<f64>>,
    /// `F(x(t)) − min F` (raw value when no oracle is attached).
    pub f_res: f64,
    /// `H(x(t)) − min H over the inner solution set` (raw value likewise).
    pub h_gap: f64,
    /// `‖x(t) − x*‖` when the oracle knows the solution.
    pub dist: Option<f64>,
    /// `ε(t)`.
    pub eps: f64,
    /// Instantaneous speed `‖ẋ(t)‖`; fills the step-size column on export.
    pub speed: f64,
}

/// Provenance of a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct FlowMeta {
    pub problem_id: String,
    pub dimension: usize,
    pub order: FlowOrder,
    /// Snapshot of the config that produced the trajectory.
    pub config: serde_json::Value,
    pub wall_ms: u128,
}

/// A sampled trajectory, the continuous analog of a solver run trace.
#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub meta: FlowMeta,
    pub records: Vec<FlowRecord>,
}

impl FlowTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_record(&self) -> &FlowRecord {
        self.records.last().expect("a trajectory has at least its initial sample")
    }

    /// `(t, value)` pairs of a scalar quantity along the trajectory.
    pub fn series(&self, f: impl Fn(&FlowRecord) -> Option<f64>) -> Vec<(f64, f64)> {
        self.records.iter().filter_map(|r| f(r).map(|v| (r.t, v))).collect()
    }
}

/// Integrate the system selected by `cfg.order`.
pub fn integrate_flow(prob: &BilevelProblem, cfg: &FlowConfig) -> Result<FlowTrace, FlowError> {
    match cfg.order {
        FlowOrder::First => integrate_first_flow(prob, cfg),
        FlowOrder::Second => integrate_second_flow(prob, cfg),
    }
}

/// Integrate `ẋ = −∇f(x) − ε(t)∇h(x)` from `x(t0) = x0`.
pub fn integrate_first_flow(
    prob: &BilevelProblem,
    cfg: &FlowConfig,
) -> Result<FlowTrace, FlowError> {
    if cfg.order != FlowOrder::First {
        return Err(FlowError::InvalidConfig(
            "config selects the second-order system; use integrate_second_flow".into(),
        ));
    }
    cfg.validate(prob)?;
    let sched = cfg.bound_sched();
    let start = Instant::now();

    let field = |t: f64, x: &Array1<f64>| -> Array1<f64> {
        let eps = sched.epsilon_continuous(t).expect("integration stays within [t0, t_end]");
        let mut g = prob.regularized_gradient(eps, x);
        g.mapv_inplace(|v| -v);
        g
    };

    let mut records = Vec::new();
    let mut x = cfg.x0.clone();
    let mut t = cfg.t0;
    let mut grid = LogGrid::new(cfg.t0);
    records.push(sample(prob, &sched, t, &x, None, &field(t, &x)));
    grid.advance_past(t);

    while t < cfg.t_end {
        let h = cfg.dt.min(cfg.t_end - t);
        rk4_first(&field, t, &mut x, h);
        t += h;
        if t >= cfg.t_end * (1.0 - 1e-12) {
            t = cfg.t_end;
        }
        if t == cfg.t_end || grid.due(t) {
            records.push(sample(prob, &sched, t, &x, None, &field(t, &x)));
            grid.advance_past(t);
        }
    }

    Ok(FlowTrace { meta: meta(prob, cfg, start), records })
}

/// Integrate `(ẋ, v̇) = (v, −(α/t)v − ∇f(x) − ε(t)∇h(x))` from
/// `x(t0) = x0`, `ẋ(t0) = v0` (zero by default).
pub fn integrate_second_flow(
    prob: &BilevelProblem,
    cfg: &FlowConfig,
) -> Result<FlowTrace, FlowError> {
    if cfg.order != FlowOrder::Second {
        return Err(FlowError::InvalidConfig(
            "config selects the first-order system; use integrate_first_flow".into(),
        ));
    }
    cfg.validate(prob)?;
    let sched = cfg.bound_sched();
    let start = Instant::now();
    let alpha = cfg.alpha;

    let accel = |t: f64, x: &Array1<f64>, v: &Array1<f64>| -> Array1<f64> {
        let eps = sched.epsilon_continuous(t).expect("integration stays within [t0, t_end]");
        let g = prob.regularized_gradient(eps, x);
        let mut out = v * (-(alpha / t));
        out -= &g;
        out
    };

    let mut records = Vec::new();
    let mut x = cfg.x0.clone();
    let mut v = cfg.v0.clone().unwrap_or_else(|| Array1::zeros(cfg.x0.len()));
    let mut t = cfg.t0;
    let mut grid = LogGrid::new(cfg.t0);
    records.push(sample(prob, &sched, t, &x, Some(&v), &v.clone()));
    grid.advance_past(t);

    while t < cfg.t_end {
        let h = cfg.dt.min(cfg.t_end - t);
        rk4_second(&accel, t, &mut x, &mut v, h);
        t += h;
        if t >= cfg.t_end * (1.0 - 1e-12) {
            t = cfg.t_end;
        }
        if t == cfg.t_end || grid.due(t) {
            records.push(sample(prob, &sched, t, &x, Some(&v), &v.clone()));
            grid.advance_past(t);
        }
    }

    Ok(FlowTrace { meta: meta(prob, cfg, start), records })
}

/// Logarithmic output grid `t0·r^i` with `r = 10^(1/SAMPLES_PER_DECADE)`.
struct LogGrid {
    t0: f64,
    idx: i32,
}

impl LogGrid {
    fn new(t0: f64) -> Self {
        Self { t0, idx: 0 }
    }

    fn next_time(&self) -> f64 {
        let ratio = 10f64.powf(1.0 / SAMPLES_PER_DECADE as f64);
        self.t0 * ratio.powi(self.idx)
    }

    fn due(&self, t: f64) -> bool {
        self.next_time() <= t
    }

    fn advance_past(&mut self, t: f64) {
        while self.next_time() <= t {
            self.idx += 1;
        }
    }
}

fn sample(
    prob: &BilevelProblem,
    sched: &Schedule,
    t: f64,
    x: &Array1<f64>,
    v: Option<&Array1<f64>>,
    xdot: &Array1<f64>,
) -> FlowRecord {
    FlowRecord {
        t,
        x: x.clone(),
        v: v.cloned(),
        f_res: prob.inner_residual(x),
        h_gap: prob.outer_gap(x),
        dist: prob.dist_to_solution(x),
        eps: sched.epsilon_continuous(t).expect("samples stay within [t0, t_end]"),
        speed: xdot.dot(xdot).sqrt(),
    }
}

fn meta(prob: &BilevelProblem, cfg: &FlowConfig, start: Instant) -> FlowMeta {
    FlowMeta {
        problem_id: prob.id.clone(),
        dimension: prob.dimension,
        order: cfg.order,
        config: serde_json::to_value(cfg).expect("flow configs serialize"),
        wall_ms: start.elapsed().as_millis(),
    }
}

/// One classical Runge-Kutta step of `ẋ = field(t, x)`.
fn rk4_first(field: &impl Fn(f64, &Array1<f64>) -> Array1<f64>, t: f64, x: &mut Array1<f64>, h: f64) {
    let k1 = field(t, x);
    let k2 = field(t + 0.5 * h, &(&*x + &(&k1 * (0.5 * h))));
    let k3 = field(t + 0.5 * h, &(&*x + &(&k2 * (0.5 * h))));
    let k4 = field(t + h, &(&*x + &(&k3 * h)));
    let incr = k1 + k2 * 2.0 + k3 * 2.0 + k4;
    x.scaled_add(h / 6.0, &incr);
}

/// One classical Runge-Kutta step of `(ẋ, v̇) = (v, accel(t, x, v))`.
fn rk4_second(
    accel: &impl Fn(f64, &Array1<f64>, &Array1<f64>) -> Array1<f64>,
    t: f64,
    x: &mut Array1<f64>,
    v: &mut Array1<f64>,
    h: f64,
) {
    let k1x = v.clone();
    let k1v = accel(t, x, v);
    let x2 = &*x + &(&k1x * (0.5 * h));
    let k2x = &*v + &(&k1v * (0.5 * h));
    let k2v = accel(t + 0.5 * h, &x2, &k2x);
    let x3 = &*x + &(&k2x * (0.5 * h));
    let k3x = &*v + &(&k2v * (0.5 * h));
    let k3v = accel(t + 0.5 * h, &x3, &k3x);
    let x4 = &*x + &(&k3x * h);
    let k4x = &*v + &(&k3v * h);
    let k4v = accel(t + h, &x4, &k4x);
    let incr_x = k1x + k2x * 2.0 + k3x * 2.0 + k4x;
    let incr_v = k1v + k2v * 2.0 + k3v * 2.0 + k4v;
    x.scaled_add(h / 6.0, &incr_x);
    v.scaled_add(h / 6.0, &incr_v);
}
