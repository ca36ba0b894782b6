//! Minimum-norm selection over the solutions of a consistent least-squares
//! problem.
//!
//! Inner: `f(x) = ½‖Ax − b‖²` with `A ∈ R^{m×d}`, `m < d`, full row rank, and
//! `b = Az` consistent, so `argmin f = {x : Ax = b}` is an affine subspace.
//! Outer: `h(x) = ½‖x‖²`. The bilevel solution is the minimum-norm solution
//! `x* = Aᵀ(AAᵀ)⁻¹b`, computed here by an explicit Cholesky solve that doubles
//! as the oracle for every derived quantity (projector, growth constant,
//! normal-cone witness).

use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::core::{
    jacobi_eigenvalues, BilevelProblem, Cholesky, CompositeObjective, HolderGrowth,
    OracleData, SmoothTerm,
};

use super::ProblemError;

/// Build the toy from an explicit matrix and consistent right-hand side.
///
/// Checks `m < d` and full row rank (via the Cholesky pivots of `AAᵀ`).
pub fn min_norm_from_matrix(
    a: Array2<f64>,
    b: Array1<f64>,
) -> Result<BilevelProblem, ProblemError> {
    let (m, d) = a.dim();
    if m == 0 || m >= d {
        return Err(ProblemError::BadSpec(format!("need 0 < m < d, got m={m}, d={d}")));
    }
    if b.len() != m {
        return Err(ProblemError::BadSpec(format!(
            "rhs has length {}, expected {m}",
            b.len()
        )));
    }
    let gram = a.dot(&a.t());
    let chol = Arc::new(Cholesky::factor(&gram).map_err(|_| ProblemError::RankDeficient)?);
    let a = Arc::new(a);
    let b = Arc::new(b);

    // x* = Aᵀ(AAᵀ)⁻¹ b, the minimum-norm point of {Ax = b}
    let x_star = a.t().dot(&chol.solve(&b));
    let resid = a.dot(&x_star) - b.as_ref();
    if resid.dot(&resid).sqrt() > 1e-9 * (1.0 + b.dot(b.as_ref()).sqrt()) {
        return Err(ProblemError::RankDeficient);
    }

    let eig = jacobi_eigenvalues(&gram);
    let lipschitz = eig[m - 1]; // λ_max(AᵀA) = λ_max(AAᵀ)
    let tau = eig[0]; // smallest nonzero eigenvalue of AᵀA
    if tau <= 0.0 {
        return Err(ProblemError::RankDeficient);
    }

    let (af, bf) = (Arc::clone(&a), Arc::clone(&b));
    let f_eval = move |x: &Array1<f64>| {
        let r = af.dot(x) - bf.as_ref();
        0.5 * r.dot(&r)
    };
    let (ag, bg) = (Arc::clone(&a), Arc::clone(&b));
    let f_grad = move |x: &Array1<f64>| {
        let r = ag.dot(x) - bg.as_ref();
        ag.t().dot(&r)
    };
    let f = SmoothTerm::new(f_eval, f_grad, lipschitz);
    let h = SmoothTerm::new(|x: &Array1<f64>| 0.5 * x.dot(x), |x| x.clone(), 1.0);

    let (ap, bp, cp) = (Arc::clone(&a), Arc::clone(&b), Arc::clone(&chol));
    let projector = move |x: &Array1<f64>| {
        // affine projection onto {Ax = b}
        let r = ap.dot(x) - bp.as_ref();
        x - &ap.t().dot(&cp.solve(&r))
    };

    let min_outer = 0.5 * x_star.dot(&x_star);
    let p_star = -&x_star; // ∂h(x*) = {x*} and x* lies in range(Aᵀ)
    let oracle = OracleData {
        x_star: Some(x_star),
        min_inner: Some(0.0),
        min_outer_on_argmin: Some(min_outer),
        reference_only: false,
        holder: Some(HolderGrowth::new(2.0, tau)?),
        argmin_projector: Some(Box::new(projector)),
        p_star: Some(p_star),
    };

    let inner = CompositeObjective::smooth_only(f);
    let outer = CompositeObjective::smooth_only(h);
    Ok(BilevelProblem::new(format!("min-norm-{m}x{d}"), d, inner, outer)?
        .with_oracle(oracle)?)
}

/// Random instance: `A` with standard normal entries (full row rank almost
/// surely), `b = Az` for standard normal `z`. Deterministic in `seed`.
pub fn make_min_norm_toy(
    m: usize,
    d: usize,
    seed: u64,
) -> Result<BilevelProblem, ProblemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || {
        // Box-Muller from two uniform draws
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let a = Array2::from_shape_fn((m, d), |_| normal());
    let z = Array1::from_shape_fn(d, |_| normal());
    let b = a.dot(&z);
    min_norm_from_matrix(a, b)
}
