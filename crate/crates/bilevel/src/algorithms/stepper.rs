//! Single-iteration updates for every method.
//!
//! All steppers mutate a [`SolverState`] in place and advance its counter.
//! The unaccelerated methods hold the iterate at index `k` and produce
//! `x_{k+1}` from the schedule value `ε_k`; the momentum methods additionally
//! carry `x_{k−1}` and the extrapolated point `y_k`.

use ndarray::Array1;

use crate::core::{BilevelProblem, CoreError};

use super::{Method, SolverConfig};

/// Mutable iteration state, confined to one run.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Index of `x_curr`.
    pub k: usize,
    pub x_curr: Array1<f64>,
    /// `x_{k−1}` (momentum methods; mirrors `x_curr` otherwise).
    pub x_prev: Array1<f64>,
    /// Last extrapolated point `y_k` (momentum methods).
    pub y: Array1<f64>,
    /// Current regularization weight of the adaptive-step comparator.
    pub stabim_eta: f64,
    /// Step size used by the most recent adaptive step.
    pub theta_k: f64,
}

impl SolverState {
    /// Initial state at `x0`. Momentum methods start at `k = 1` with
    /// `x_1 := x_0`, so the first extrapolation has zero displacement.
    pub fn init(cfg: &SolverConfig, x0: &Array1<f64>) -> Self {
        Self {
            k: if cfg.method.is_momentum() { 1 } else { 0 },
            x_curr: x0.clone(),
            x_prev: x0.clone(),
            y: x0.clone(),
            stabim_eta: cfg.stabim_eta0,
            theta_k: f64::NAN,
        }
    }
}

/// Extrapolation coefficient `α_k = 1 − α/(k + γ + 1)`.
pub(crate) fn momentum_coefficient(alpha: f64, gamma: f64, k: usize) -> f64 {
    1.0 - alpha / (k as f64 + gamma + 1.0)
}

/// One proximal-gradient step on `F + ε_k·H`:
/// `x_{k+1} = prox_{θ(f̂+ε_kĥ)}(x_k − θ(∇f(x_k) + ε_k∇h(x_k)))`.
pub fn step_bpg(
    prob: &BilevelProblem,
    cfg: &SolverConfig,
    step: f64,
    state: &mut SolverState,
) -> Result<(), CoreError> {
    let eps = cfg.epsilon_at(state.k);
    let g = prob.regularized_gradient(eps, &state.x_curr);
    let v = &state.x_curr - &(g * step);
    state.x_curr = prob.combined_prox(step, eps, &v)?;
    state.k += 1;
    Ok(())
}

/// One accelerated step: extrapolate `y_k = x_k + α_k(x_k − x_{k−1})`, then
/// `x_{k+1} = prox_{s(f̂+ε_kĥ)}(y_k − s(∇f(y_k) + ε_k∇h(y_k)))`.
pub fn step_bfpg(
    prob: &BilevelProblem,
    cfg: &SolverConfig,
    step: f64,
    state: &mut SolverState,
) -> Result<(), CoreError> {
    let k = state.k;
    let alpha_k = momentum_coefficient(cfg.alpha, cfg.gamma, k);
    let disp = &state.x_curr - &state.x_prev;
    state.y = &state.x_curr + &(disp * alpha_k);
    let eps = cfg.epsilon_at(k);
    let g = prob.regularized_gradient(eps, &state.y);
    let v = &state.y - &(g * step);
    let x_next = prob.combined_prox(step, eps, &v)?;
    state.x_prev = std::mem::replace(&mut state.x_curr, x_next);
    state.k += 1;
    Ok(())
}

/// The pinned variant: rewrite `γ := α−1`, `c := 1`, `β := α−1` and take an
/// accelerated step under those parameters.
pub fn step_fbipg(
    prob: &BilevelProblem,
    cfg: &SolverConfig,
    step: f64,
    state: &mut SolverState,
) -> Result<(), CoreError> {
    let rewritten = cfg
        .normalized()
        .map_err(|e| CoreError::InvalidSchedule(e.to_string()))?;
    step_bfpg(prob, &rewritten, step, state)
}

/// Adaptive-step update: shrink `η`, derive `θ_{k+1} = θ̃/(η_{k+1}L_∇h +
/// L_∇f)`, then take a proximal-gradient step with that step size.
pub fn step_stabim(
    prob: &BilevelProblem,
    cfg: &SolverConfig,
    state: &mut SolverState,
) -> Result<(), CoreError> {
    state.stabim_eta *= cfg.stabim_eta_shrink;
    let l_h = prob.outer.smooth.lipschitz;
    let l_f = prob.inner.smooth.lipschitz;
    state.theta_k = cfg.stabim_theta_tilde / (state.stabim_eta * l_h + l_f);
    let eps = cfg.epsilon_at(state.k);
    let g = prob.regularized_gradient(eps, &state.x_curr);
    let v = &state.x_curr - &(g * state.theta_k);
    state.x_curr = prob.combined_prox(state.theta_k, eps, &v)?;
    state.k += 1;
    Ok(())
}

/// Two-stage update: a proximal-gradient step on the inner objective
/// followed by one on the outer, `ε_k = c/(k+1)^δ`. Needs only the separate
/// proxes of `f̂` and `ĥ`, never a combined prox.
pub fn step_bisg2(
    prob: &BilevelProblem,
    cfg: &SolverConfig,
    step: f64,
    state: &mut SolverState,
) -> Result<(), CoreError> {
    let eps = cfg.epsilon_at(state.k);
    let gf = prob.inner.smooth.grad(&state.x_curr);
    let y = prob.inner.prox.prox(step, &(&state.x_curr - &(gf * step)));
    let w = step * eps;
    let gh = prob.outer.smooth.grad(&y);
    state.x_curr = prob.outer.prox.prox(w, &(&y - &(gh * w)));
    state.k += 1;
    Ok(())
}

/// Dispatch one step of the configured method.
pub fn step(
    prob: &BilevelProblem,
    cfg: &SolverConfig,
    step_size: f64,
    state: &mut SolverState,
) -> Result<(), CoreError> {
    match cfg.method {
        Method::Bpg => step_bpg(prob, cfg, step_size, state),
        Method::Bfpg => step_bfpg(prob, cfg, step_size, state),
        Method::Fbipg => step_fbipg(prob, cfg, step_size, state),
        Method::Stabim => step_stabim(prob, cfg, state),
        Method::Bisg2 => step_bisg2(prob, cfg, step_size, state),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{one_dim_quadratics, Schedule};

    fn unit_schedule() -> Schedule {
        Schedule::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn momentum_coefficient_hand_values() {
        assert_eq!(momentum_coefficient(4.0, 0.0, 1), -1.0);
        assert!((momentum_coefficient(4.0, 20.0, 19) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn unaccelerated_hand_step() {
        // f = ½x², h = ½(x−1)², θ = 1, ε_0 = 1, x_0 = 1:
        // gradient is x + (x−1) = 1 at x=1, so x_1 = 0.
        let prob = one_dim_quadratics();
        let cfg = SolverConfig::new(Method::Bpg, unit_schedule(), 1).with_step(1.0);
        let mut st = SolverState::init(&cfg, &ndarray::arr1(&[1.0]));
        step_bpg(&prob, &cfg, 1.0, &mut st).unwrap();
        assert_eq!(st.k, 1);
        assert!((st.x_curr[0]).abs() < 1e-15);
    }

    #[test]
    fn zero_schedule_reduces_to_gradient_descent() {
        let prob = one_dim_quadratics();
        let cfg = SolverConfig::new(Method::Bpg, Schedule::zero(), 1).with_step(0.5);
        let mut st = SolverState::init(&cfg, &ndarray::arr1(&[1.0]));
        step_bpg(&prob, &cfg, 0.5, &mut st).unwrap();
        assert!((st.x_curr[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn stationary_point_is_fixed() {
        // both f = ½x² and h = ½(x−1)² vanish their gradients only jointly
        // nowhere; build matching quadratics centered at the same point
        use crate::core::{BilevelProblem, CompositeObjective, SmoothTerm};
        let quad = |center: f64| {
            SmoothTerm::new(
                move |x: &Array1<f64>| 0.5 * (x[0] - center).powi(2),
                move |x: &Array1<f64>| ndarray::arr1(&[x[0] - center]),
                1.0,
            )
        };
        let prob = BilevelProblem::new(
            "fixed-point",
            1,
            CompositeObjective::smooth_only(quad(2.0)),
            CompositeObjective::smooth_only(quad(2.0)),
        )
        .unwrap();
        let cfg = SolverConfig::new(Method::Bpg, unit_schedule(), 5).with_step(1.0);
        let mut st = SolverState::init(&cfg, &ndarray::arr1(&[2.0]));
        for _ in 0..5 {
            step_bpg(&prob, &cfg, 1.0, &mut st).unwrap();
            assert_eq!(st.x_curr[0], 2.0);
        }
    }

    #[test]
    fn first_momentum_step_has_zero_displacement() {
        let prob = one_dim_quadratics();
        let cfg = SolverConfig::new(Method::Bfpg, unit_schedule(), 2).with_step(0.5);
        let mut st = SolverState::init(&cfg, &ndarray::arr1(&[1.0]));
        assert_eq!(st.k, 1);
        step_bfpg(&prob, &cfg, 0.5, &mut st).unwrap();
        // α_1 = −1 but x_1 − x_0 = 0, so y_1 = x_1 and the step is plain
        // proximal gradient at x_1 = 1 with ε_1 = ½: the gradient there is
        // ∇f + ε∇h = 1 + ½·0 = 1, hence x_2 = 1 − 0.5·1 = 0.5.
        assert_eq!(st.y[0], 1.0);
        assert!((st.x_curr[0] - 0.5).abs() < 1e-15);
        assert_eq!(st.x_prev[0], 1.0);
    }

    #[test]
    fn two_stage_hand_step() {
        // θ = 1, c = 1, δ = 1, ε_0 = 1, x_0 = 2:
        // y_1 = 2 − 1·2 = 0, x_1 = 0 − 1·(0 − 1) = 1.
        let prob = one_dim_quadratics();
        let cfg =
            SolverConfig::new(Method::Bisg2, unit_schedule(), 1).with_step(1.0);
        let mut st = SolverState::init(&cfg, &ndarray::arr1(&[2.0]));
        step_bisg2(&prob, &cfg, 1.0, &mut st).unwrap();
        assert!((st.x_curr[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_step_shrinks_eta_and_derives_theta() {
        let prob = one_dim_quadratics();
        let cfg = SolverConfig::new(Method::Stabim, unit_schedule(), 120);
        let mut st = SolverState::init(&cfg, &ndarray::arr1(&[1.0]));
        step_stabim(&prob, &cfg, &mut st).unwrap();
        assert!((st.stabim_eta - 0.75).abs() < 1e-15);
        assert!((st.theta_k - 0.95 / 1.75).abs() < 1e-15);
        // η → 0 drives the step to θ̃/L_∇f
        for _ in 0..119 {
            step_stabim(&prob, &cfg, &mut st).unwrap();
        }
        assert!((st.theta_k - 0.95).abs() < 0.01 * 0.95);
    }
}
