//! Vanishing regularization schedules.
//!
//! Discrete: `ε_k = c/(k+β)^δ`. Continuous: `ε(t) = c/t^δ` for `t >= t0`.
//! Both are strictly positive and strictly decreasing for `c > 0`; a dedicated
//! zero schedule (`c = 0`) exists so solvers degrade to their unregularized
//! limits in reduction tests.

use serde::{Deserialize, Serialize};

use super::CoreError;

/// Polynomially vanishing weight sequence for the outer objective.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Schedule {
    /// Scale `c > 0` (or exactly 0 via [`Schedule::zero`]).
    pub c: f64,
    /// Decay exponent `δ > 0`.
    pub delta: f64,
    /// Index offset `β > 0`.
    pub beta: f64,
    /// Left end of the continuous-time domain (`ε(t)` is defined for `t >= t0`).
    #[serde(default = "default_t0")]
    pub t0: f64,
}

fn default_t0() -> f64 {
    1.0
}

impl Schedule {
    /// `ε_k = c/(k+β)^δ`; validates `c > 0`, `δ > 0`, `β > 0`.
    pub fn new(c: f64, delta: f64, beta: f64) -> Result<Self, CoreError> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(CoreError::InvalidSchedule(format!("c must be positive, got {c}")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(CoreError::InvalidSchedule(format!(
                "delta must be positive, got {delta}"
            )));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(CoreError::InvalidSchedule(format!(
                "beta must be positive, got {beta}"
            )));
        }
        Ok(Self { c, delta, beta, t0: 1.0 })
    }

    pub fn with_t0(mut self, t0: f64) -> Result<Self, CoreError> {
        if !(t0 > 0.0) || !t0.is_finite() {
            return Err(CoreError::InvalidSchedule(format!("t0 must be positive, got {t0}")));
        }
        self.t0 = t0;
        Ok(self)
    }

    /// The identically zero schedule (`ε_k ≡ 0`), the `c → 0` limit under
    /// which the solvers reduce to their unregularized counterparts.
    pub fn zero() -> Self {
        Self { c: 0.0, delta: 1.0, beta: 1.0, t0: 1.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.c == 0.0
    }

    /// `ε_k = c/(k+β)^δ`.
    pub fn epsilon_discrete(&self, k: usize) -> f64 {
        self.c / (k as f64 + self.beta).powf(self.delta)
    }

    /// `ε(t) = c/t^δ`; errors for `t < t0` (outside the schedule's domain).
    pub fn epsilon_continuous(&self, t: f64) -> Result<f64, CoreError> {
        if t < self.t0 {
            return Err(CoreError::InvalidSchedule(format!(
                "epsilon(t) requested at t={t} below t0={}",
                self.t0
            )));
        }
        Ok(self.c / t.powf(self.delta))
    }

    /// d/dt of `ε(t)`, used by continuous-time energy identities.
    pub fn epsilon_continuous_derivative(&self, t: f64) -> Result<f64, CoreError> {
        if t < self.t0 {
            return Err(CoreError::InvalidSchedule(format!(
                "epsilon'(t) requested at t={t} below t0={}",
                self.t0
            )));
        }
        Ok(-self.delta * self.c / t.powf(self.delta + 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_values_match_formula() {
        let s = Schedule::new(10.0, 1.5, 10.0).unwrap();
        // 10/10^1.5 = 10^(-1/2)
        assert!((s.epsilon_discrete(0) - 0.31622776601683794).abs() < 1e-15);
        let s = Schedule::new(100.0, 1.9, 1.0).unwrap();
        // 100/100^1.9 = 10^(-1.8)
        assert!((s.epsilon_discrete(99) - 0.015848931924611134).abs() < 1e-15);
    }

    #[test]
    fn continuous_value_and_domain() {
        let s = Schedule::new(10.0, 1.5, 1.0).unwrap().with_t0(1.0).unwrap();
        assert!((s.epsilon_continuous(4.0).unwrap() - 1.25).abs() < 1e-15);
        assert!(s.epsilon_continuous(0.5).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let s = Schedule::new(3.0, 1.2, 1.0).unwrap();
        for &t in &[1.5, 2.0, 17.0, 400.0] {
            let h = 1e-6 * t;
            let fd = (s.epsilon_continuous(t + h).unwrap()
                - s.epsilon_continuous(t - h).unwrap())
                / (2.0 * h);
            let an = s.epsilon_continuous_derivative(t).unwrap();
            assert!((fd - an).abs() < 1e-8 * an.abs().max(1e-8), "t={t}: {fd} vs {an}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Schedule::new(0.0, 1.0, 1.0).is_err());
        assert!(Schedule::new(-1.0, 1.0, 1.0).is_err());
        assert!(Schedule::new(1.0, 0.0, 1.0).is_err());
        assert!(Schedule::new(1.0, 1.0, 0.0).is_err());
        assert!(Schedule::new(1.0, 1.0, 1.0).unwrap().with_t0(0.0).is_err());
    }

    #[test]
    fn loglog_slope_is_exactly_minus_delta() {
        // regress log eps_k on log(k+beta): slope -delta to machine precision
        let s = Schedule::new(2.5, 1.37, 3.0).unwrap();
        let ks: Vec<usize> = (1..=2000).step_by(37).collect();
        let xs: Vec<f64> = ks.iter().map(|&k| (k as f64 + s.beta).ln()).collect();
        let ys: Vec<f64> = ks.iter().map(|&k| s.epsilon_discrete(k).ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        assert!((slope + s.delta).abs() < 1e-12, "slope {slope}");
        // residuals vanish: the relation is exactly linear in log-log space
        for (x, y) in xs.iter().zip(&ys) {
            let pred = my + slope * (x - mx);
            assert!((pred - y).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_decreasing_and_positive() {
        let s = Schedule::new(7.0, 0.6, 2.0).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..500 {
            let e = s.epsilon_discrete(k);
            assert!(e > 0.0 && e < prev);
            prev = e;
        }
    }
}
