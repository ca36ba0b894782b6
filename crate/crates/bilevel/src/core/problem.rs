//! The bilevel problem container and the regularized family `Ψ_ε = F + ε·H`.

use ndarray::Array1;

use super::prox::{combined_prox, JointProxFn};
use super::{CompositeObjective, CoreError};

/// Hölderian growth certificate for the inner objective: for all `x`,
/// `τ/ρ · dist(x, argmin F)^ρ <= F(x) − min F` with `ρ ∈ (1, 2]`, `τ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderGrowth {
    pub rho: f64,
    pub tau: f64,
}

impl HolderGrowth {
    pub fn new(rho: f64, tau: f64) -> Result<Self, CoreError> {
        if !(rho > 1.0 && rho <= 2.0) {
            return Err(CoreError::InvalidProblem(format!(
                "growth exponent rho must lie in (1, 2], got {rho}"
            )));
        }
        if !(tau > 0.0) {
            return Err(CoreError::InvalidProblem(format!(
                "growth constant tau must be positive, got {tau}"
            )));
        }
        Ok(Self { rho, tau })
    }

    /// Dual exponent `ρ*` with `1/ρ + 1/ρ* = 1`.
    pub fn dual_exponent(&self) -> f64 {
        self.rho / (self.rho - 1.0)
    }
}

type Projector = Box<dyn Fn(&Array1<f64>) -> Array1<f64> + Send + Sync>;

/// Ground-truth data attached to benchmark problems. Fields are optional
/// because not every instance admits a closed form; `reference_only` marks
/// values produced by long reference runs rather than exact arithmetic.
pub struct OracleData {
    /// The bilevel solution (minimizer of H over argmin F), when known.
    pub x_star: Option<Array1<f64>>,
    /// Minimal inner value `min F`.
    pub min_inner: Option<f64>,
    /// Outer value at the bilevel solution, `min { H(x) : x ∈ argmin F }`.
    pub min_outer_on_argmin: Option<f64>,
    /// True when the values above come from a reference run, not a closed form.
    pub reference_only: bool,
    /// Growth certificate for the inner objective.
    pub holder: Option<HolderGrowth>,
    /// Euclidean projector onto `argmin F`, when it has a usable form.
    pub argmin_projector: Option<Projector>,
    /// A vector `p* ∈ N_{argmin F}(x*)` with `−p* ∈ ∂H(x*)`, used by the
    /// growth-based outer bound.
    pub p_star: Option<Array1<f64>>,
}

impl OracleData {
    pub fn exact(x_star: Array1<f64>, min_inner: f64, min_outer_on_argmin: f64) -> Self {
        Self {
            x_star: Some(x_star),
            min_inner: Some(min_inner),
            min_outer_on_argmin: Some(min_outer_on_argmin),
            reference_only: false,
            holder: None,
            argmin_projector: None,
            p_star: None,
        }
    }
}

impl std::fmt::Debug for OracleData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OracleData")
            .field("x_star", &self.x_star.as_ref().map(|x| x.len()))
            .field("min_inner", &self.min_inner)
            .field("min_outer_on_argmin", &self.min_outer_on_argmin)
            .field("reference_only", &self.reference_only)
            .field("holder", &self.holder)
            .field("has_projector", &self.argmin_projector.is_some())
            .field("has_p_star", &self.p_star.is_some())
            .finish()
    }
}

pub use super::prox::JointProxFn as JointProx;

/// A simple bilevel problem: minimize `outer = h + ĥ` over `argmin inner = f + f̂`.
///
/// Shared immutably across concurrent solver runs; all mutation lives in
/// per-run solver state.
pub struct BilevelProblem {
    pub inner: CompositeObjective,
    pub outer: CompositeObjective,
    pub dimension: usize,
    /// Short stable identifier for traces and manifests.
    pub id: String,
    pub oracle: Option<OracleData>,
    joint_prox: Option<Box<JointProxFn>>,
}

impl BilevelProblem {
    pub fn new(
        id: impl Into<String>,
        dimension: usize,
        inner: CompositeObjective,
        outer: CompositeObjective,
    ) -> Result<Self, CoreError> {
        if dimension == 0 {
            return Err(CoreError::InvalidProblem("dimension must be positive".into()));
        }
        Ok(Self { inner, outer, dimension, id: id.into(), oracle: None, joint_prox: None })
    }

    /// Attach oracle data; checks `F(x*) = min F` to 1e-10 relative when both
    /// are present and exact.
    pub fn with_oracle(mut self, oracle: OracleData) -> Result<Self, CoreError> {
        if let (Some(xs), Some(mi)) = (&oracle.x_star, oracle.min_inner) {
            if xs.len() != self.dimension {
                return Err(CoreError::DimensionMismatch {
                    expected: self.dimension,
                    got: xs.len(),
                });
            }
            if !oracle.reference_only {
                let fx = self.inner.value(xs);
                if (fx - mi).abs() > 1e-10 * (1.0 + mi.abs()) {
                    return Err(CoreError::InvalidProblem(format!(
                        "oracle inconsistent: F(x*) = {fx}, claimed min = {mi}"
                    )));
                }
            }
        }
        self.oracle = Some(oracle);
        Ok(self)
    }

    /// Register a joint prox for `s·(f̂ + ε·ĥ)`, enabling combinations with no
    /// separable closed form.
    pub fn with_joint_prox(
        mut self,
        joint: impl Fn(f64, f64, &Array1<f64>) -> Array1<f64> + Send + Sync + 'static,
    ) -> Self {
        self.joint_prox = Some(Box::new(joint));
        self
    }

    /// Set (or overwrite) a reference value for `min F` produced by a long
    /// high-accuracy run; marks the oracle reference-only.
    pub fn with_reference_min_inner(mut self, value: f64) -> Self {
        match &mut self.oracle {
            Some(o) => {
                o.min_inner = Some(value);
                o.reference_only = true;
            }
            None => {
                self.oracle = Some(OracleData {
                    x_star: None,
                    min_inner: Some(value),
                    min_outer_on_argmin: None,
                    reference_only: true,
                    holder: None,
                    argmin_projector: None,
                    p_star: None,
                });
            }
        }
        self
    }

    /// `Ψ_ε(x) = F(x) + ε·H(x)` (includes both prox parts; may be `+∞`).
    pub fn regularized_value(&self, eps: f64, x: &Array1<f64>) -> f64 {
        self.check_dim(x);
        self.inner.value(x) + eps * self.outer.value(x)
    }

    /// Gradient of the smooth part of `Ψ_ε`: `∇f(x) + ε·∇h(x)`.
    pub fn regularized_gradient(&self, eps: f64, x: &Array1<f64>) -> Array1<f64> {
        self.check_dim(x);
        let mut g = self.inner.smooth.grad(x);
        if eps != 0.0 {
            let gh = self.outer.smooth.grad(x);
            g.zip_mut_with(&gh, |a, b| *a += eps * b);
        }
        g
    }

    /// Prox of the combined nonsmooth part `s·(f̂ + ε·ĥ)` at `v`, honoring a
    /// registered joint prox.
    pub fn combined_prox(
        &self,
        s: f64,
        eps: f64,
        v: &Array1<f64>,
    ) -> Result<Array1<f64>, CoreError> {
        self.check_dim(v);
        combined_prox(
            &self.inner.prox,
            &self.outer.prox,
            self.joint_prox.as_deref(),
            s,
            eps,
            v,
        )
    }

    /// Gradient Lipschitz bound of the smooth part of `Ψ_ε`.
    pub fn regularized_lipschitz(&self, eps: f64) -> f64 {
        self.inner.smooth.lipschitz + eps * self.outer.smooth.lipschitz
    }

    /// Both prox parts vanish (the problem is smooth); continuous-time flows
    /// are only defined in this case.
    pub fn is_smooth(&self) -> bool {
        self.inner.prox.is_zero() && self.outer.prox.is_zero()
    }

    pub fn inner_value(&self, x: &Array1<f64>) -> f64 {
        self.inner.value(x)
    }

    pub fn outer_value(&self, x: &Array1<f64>) -> f64 {
        self.outer.value(x)
    }

    /// `F(x) − min F` when the oracle knows the minimum, else `F(x)`.
    pub fn inner_residual(&self, x: &Array1<f64>) -> f64 {
        let v = self.inner.value(x);
        match self.oracle.as_ref().and_then(|o| o.min_inner) {
            Some(m) => v - m,
            None => v,
        }
    }

    /// `H(x) − min_{argmin F} H` when known, else `H(x)`.
    pub fn outer_gap(&self, x: &Array1<f64>) -> f64 {
        let v = self.outer.value(x);
        match self.oracle.as_ref().and_then(|o| o.min_outer_on_argmin) {
            Some(m) => v - m,
            None => v,
        }
    }

    /// `‖x − x*‖` when the oracle knows the solution.
    pub fn dist_to_solution(&self, x: &Array1<f64>) -> Option<f64> {
        let xs = self.oracle.as_ref()?.x_star.as_ref()?;
        let d = x - xs;
        Some(d.dot(&d).sqrt())
    }

    fn check_dim(&self, x: &Array1<f64>) {
        assert_eq!(
            x.len(),
            self.dimension,
            "vector dimension {} does not match problem dimension {}",
            x.len(),
            self.dimension
        );
    }
}

impl std::fmt::Debug for BilevelProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BilevelProblem")
            .field("id", &self.id)
            .field("dimension", &self.dimension)
            .field("inner", &self.inner)
            .field("outer", &self.outer)
            .field("oracle", &self.oracle)
            .finish()
    }
}

/// 1-D helper used across tests: `f = ½x²`, `h = ½(x−1)²`, no prox parts.
#[cfg(test)]
pub fn one_dim_quadratics() -> BilevelProblem {
    use super::SmoothTerm;
    let f = SmoothTerm::new(|x: &Array1<f64>| 0.5 * x[0] * x[0], |x| x.clone(), 1.0);
    let h = SmoothTerm::new(
        |x: &Array1<f64>| 0.5 * (x[0] - 1.0) * (x[0] - 1.0),
        |x| Array1::from(vec![x[0] - 1.0]),
        1.0,
    );
    BilevelProblem::new(
        "1d-quadratics",
        1,
        CompositeObjective::smooth_only(f),
        CompositeObjective::smooth_only(h),
    )
    .unwrap()
}
