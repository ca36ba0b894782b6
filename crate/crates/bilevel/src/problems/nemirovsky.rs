//! Chain-quadratic worst-case instance with an ℓ1 outer objective.
//!
//! Inner: `f(x) = ½(x₁−1)² + ½Σ_{j=2..J}(x_{j−1}−x_j)²` on `R^d` with
//! `1 < J < d`, so `argmin f = {x : x₁ = … = x_J = 1}` and coordinates past
//! `J` are free. Outer: `H(x) = ‖x − x̂‖₁` with a constant anchor
//! `x̂ = (anchor, …, anchor)`. The bilevel solution sets the first `J`
//! coordinates to 1 and the rest to the anchor.
//!
//! The inner Hessian restricted to its active block is the `J×J` tridiagonal
//! matrix with diagonal `(2, …, 2, 1)` and off-diagonal `−1`; its spectrum
//! lies in `(0, 4)`, which gives both the gradient Lipschitz bound and the
//! quadratic growth constant `τ` (smallest eigenvalue of the block).

use ndarray::Array1;

use crate::core::{
    power_iteration, BilevelProblem, CompositeObjective, HolderGrowth, OracleData,
    ProxTerm, SmoothTerm,
};

use super::ProblemError;

/// Parameters of the chain-quadratic instance.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct NemirovskySpec {
    /// Ambient dimension `d`.
    pub d: usize,
    /// Active chain length `J`, with `1 < J < d`.
    pub j: usize,
    /// Anchor value of the outer ℓ1 term (defaults to 50).
    pub anchor: f64,
}

impl Default for NemirovskySpec {
    fn default() -> Self {
        Self { d: 200, j: 100, anchor: 50.0 }
    }
}

/// Multiply by the active-block Hessian (tridiagonal, `J×J`).
fn block_matvec(x: &[f64], y: &mut [f64]) {
    let j = x.len();
    debug_assert!(j >= 2);
    y[0] = 2.0 * x[0] - x[1];
    for i in 1..j - 1 {
        y[i] = -x[i - 1] + 2.0 * x[i] - x[i + 1];
    }
    y[j - 1] = -x[j - 2] + x[j - 1];
}

/// Solve the tridiagonal SPD system `T y = rhs` (Thomas algorithm).
fn block_solve(rhs: &[f64]) -> Vec<f64> {
    let j = rhs.len();
    // diagonal (2,…,2,1), off-diagonals −1
    let mut c = vec![0.0; j]; // modified superdiagonal
    let mut d = vec![0.0; j]; // modified rhs
    let diag = |i: usize| if i == j - 1 { 1.0 } else { 2.0 };
    c[0] = -1.0 / diag(0);
    d[0] = rhs[0] / diag(0);
    for i in 1..j {
        let m = diag(i) - (-1.0) * c[i - 1];
        if i < j - 1 {
            c[i] = -1.0 / m;
        }
        d[i] = (rhs[i] - (-1.0) * d[i - 1]) / m;
    }
    let mut y = vec![0.0; j];
    y[j - 1] = d[j - 1];
    for i in (0..j - 1).rev() {
        y[i] = d[i] - c[i] * y[i + 1];
    }
    y
}

/// Gradient Lipschitz constant of the inner objective: the largest eigenvalue
/// of the active block, by power iteration to 1e-10. Always strictly below
/// the analytic bound 4, which is asserted.
pub fn nemirovsky_lipschitz(j: usize) -> f64 {
    assert!(j >= 2, "chain length must be at least 2");
    let l = power_iteration(
        |v| {
            let mut y = Array1::zeros(j);
            block_matvec(v.as_slice().unwrap(), y.as_slice_mut().unwrap());
            y
        },
        j,
        1e-10,
        500_000,
    );
    assert!(l < 4.0, "spectral bound violated: {l}");
    l
}

/// Smallest eigenvalue of the active block (the quadratic growth constant),
/// by inverse power iteration with exact tridiagonal solves.
fn block_smallest_eigenvalue(j: usize) -> f64 {
    let mut v: Vec<f64> = (0..j).map(|i| 1.0 + 0.1 * (i as f64 * 0.9).sin()).collect();
    let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
    v.iter_mut().for_each(|t| *t /= norm);
    let mut lambda = 0.0f64;
    for _ in 0..10_000 {
        let w = block_solve(&v);
        let wn = w.iter().map(|t| t * t).sum::<f64>().sqrt();
        let vn: Vec<f64> = w.iter().map(|t| t / wn).collect();
        // Rayleigh quotient of T at the current vector
        let mut tv = vec![0.0; j];
        block_matvec(&vn, &mut tv);
        let ray: f64 = vn.iter().zip(&tv).map(|(a, b)| a * b).sum();
        v = vn;
        if (ray - lambda).abs() <= 1e-13 * ray.abs().max(1e-300) {
            return ray;
        }
        lambda = ray;
    }
    lambda
}

/// Build the chain-quadratic instance with its exact oracle.
pub fn make_nemirovsky(spec: NemirovskySpec) -> Result<BilevelProblem, ProblemError> {
    let NemirovskySpec { d, j, anchor } = spec;
    if !(j > 1 && j < d) {
        return Err(ProblemError::BadSpec(format!(
            "need 1 < J < d, got J={j}, d={d}"
        )));
    }
    let lipschitz = nemirovsky_lipschitz(j);

    let f = SmoothTerm::new(
        move |x: &Array1<f64>| {
            let mut v = 0.5 * (x[0] - 1.0) * (x[0] - 1.0);
            for i in 1..j {
                let t = x[i - 1] - x[i];
                v += 0.5 * t * t;
            }
            v
        },
        move |x: &Array1<f64>| {
            let mut g = Array1::zeros(x.len());
            g[0] = x[0] - 1.0 + (x[0] - x[1]);
            for i in 1..j - 1 {
                g[i] = (x[i] - x[i - 1]) + (x[i] - x[i + 1]);
            }
            g[j - 1] = x[j - 1] - x[j - 2];
            g
        },
        lipschitz,
    );

    let shift = Array1::from_elem(d, anchor);
    let inner = CompositeObjective::smooth_only(f);
    let outer =
        CompositeObjective::new(SmoothTerm::zero(), ProxTerm::ShiftedL1 { shift });

    let mut x_star = Array1::from_elem(d, anchor);
    for i in 0..j {
        x_star[i] = 1.0;
    }
    let min_outer = j as f64 * (anchor - 1.0).abs();
    let tau = block_smallest_eigenvalue(j);
    // p* lives in the normal cone of argmin f (the span of the active
    // coordinates) with −p* a subgradient of the outer term at x*
    let mut p_star = Array1::zeros(d);
    let sgn = (anchor - 1.0).signum();
    for i in 0..j {
        p_star[i] = sgn;
    }

    let oracle = OracleData {
        x_star: Some(x_star),
        min_inner: Some(0.0),
        min_outer_on_argmin: Some(min_outer),
        reference_only: false,
        holder: Some(HolderGrowth::new(2.0, tau)?),
        argmin_projector: Some(Box::new(move |x: &Array1<f64>| {
            let mut p = x.clone();
            for i in 0..j {
                p[i] = 1.0;
            }
            p
        })),
        p_star: Some(p_star),
    };

    Ok(BilevelProblem::new(format!("nemirovsky-d{d}-j{j}"), d, inner, outer)?
        .with_oracle(oracle)?)
}
