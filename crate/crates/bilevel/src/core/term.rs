//! Smooth objective terms and smooth+prox composites.

use ndarray::Array1;

use super::prox::ProxTerm;

type EvalFn = Box<dyn Fn(&Array1<f64>) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&Array1<f64>) -> Array1<f64> + Send + Sync>;

/// A convex function with Lipschitz-continuous gradient.
///
/// `lipschitz` must upper-bound the gradient's Lipschitz constant; solvers
/// derive admissible step sizes from it, so a too-small value breaks their
/// convergence guarantees while a loose upper bound merely slows them down.
pub struct SmoothTerm {
    eval: EvalFn,
    grad: GradFn,
    /// Upper bound on the Lipschitz constant of the gradient.
    pub lipschitz: f64,
}

impl SmoothTerm {
    pub fn new(
        eval: impl Fn(&Array1<f64>) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Array1<f64>) -> Array1<f64> + Send + Sync + 'static,
        lipschitz: f64,
    ) -> Self {
        assert!(
            lipschitz.is_finite() && lipschitz >= 0.0,
            "gradient Lipschitz bound must be finite and nonnegative"
        );
        Self { eval: Box::new(eval), grad: Box::new(grad), lipschitz }
    }

    /// The identically zero term (gradient zero, Lipschitz constant zero).
    pub fn zero() -> Self {
        Self::new(|_| 0.0, |x| Array1::zeros(x.len()), 0.0)
    }

    pub fn eval(&self, x: &Array1<f64>) -> f64 {
        (self.eval)(x)
    }

    pub fn grad(&self, x: &Array1<f64>) -> Array1<f64> {
        (self.grad)(x)
    }

    /// Central finite-difference gradient, for checking `grad` against `eval`.
    pub fn grad_fd(&self, x: &Array1<f64>, h: f64) -> Array1<f64> {
        let mut g = Array1::zeros(x.len());
        let mut xp = x.clone();
        for i in 0..x.len() {
            let xi = x[i];
            xp[i] = xi + h;
            let fp = self.eval(&xp);
            xp[i] = xi - h;
            let fm = self.eval(&xp);
            xp[i] = xi;
            g[i] = (fp - fm) / (2.0 * h);
        }
        g
    }
}

impl std::fmt::Debug for SmoothTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothTerm").field("lipschitz", &self.lipschitz).finish()
    }
}

/// A composite objective `value = smooth + prox_term`, the shape both levels
/// of a bilevel problem share.
#[derive(Debug)]
pub struct CompositeObjective {
    pub smooth: SmoothTerm,
    pub prox: ProxTerm,
}

impl CompositeObjective {
    pub fn new(smooth: SmoothTerm, prox: ProxTerm) -> Self {
        Self { smooth, prox }
    }

    /// A purely smooth objective (prox part identically zero).
    pub fn smooth_only(smooth: SmoothTerm) -> Self {
        Self { smooth, prox: ProxTerm::Zero }
    }

    /// Total value `smooth(x) + prox_term(x)`; may be `+∞` for indicator terms.
    pub fn value(&self, x: &Array1<f64>) -> f64 {
        self.smooth.eval(x) + self.prox.eval(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_term_is_zero() {
        let z = SmoothTerm::zero();
        let x = array![1.0, -2.0, 3.0];
        assert_eq!(z.eval(&x), 0.0);
        assert_eq!(z.grad(&x), Array1::<f64>::zeros(3));
        assert_eq!(z.lipschitz, 0.0);
    }

    #[test]
    fn finite_difference_matches_quadratic_gradient() {
        // f(x) = ½‖x‖² + x₁, ∇f = x + e₁
        let t = SmoothTerm::new(
            |x| 0.5 * x.dot(x) + x[0],
            |x| {
                let mut g = x.clone();
                g[0] += 1.0;
                g
            },
            1.0,
        );
        let x = array![0.3, -1.2, 2.0];
        let g = t.grad(&x);
        let gfd = t.grad_fd(&x, 1e-6);
        for i in 0..3 {
            assert!((g[i] - gfd[i]).abs() < 1e-8, "coord {i}: {} vs {}", g[i], gfd[i]);
        }
    }

    #[test]
    fn composite_value_adds_prox_part() {
        let c = CompositeObjective::new(SmoothTerm::zero(), ProxTerm::L1);
        assert_eq!(c.value(&array![1.0, -2.0]), 3.0);
    }
}
