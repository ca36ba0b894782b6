//! Small dense linear-algebra utilities: power iteration for extreme
//! eigenvalues of PSD operators, a cyclic Jacobi eigensolver for small
//! symmetric matrices, and a Cholesky solve for SPD systems.
//!
//! These back Lipschitz-constant and growth-constant derivations; they are
//! deliberately dependency-free so they can double as independent oracles for
//! each other in tests.

use ndarray::{Array1, Array2};

use super::CoreError;

/// Largest eigenvalue of a symmetric PSD operator given by its matvec,
/// by power iteration with Rayleigh-quotient convergence test.
///
/// Stops when the Rayleigh quotient changes by less than `tol` (relative) or
/// after `max_iter` products. The start vector is deterministic, with sign
/// alternation plus a harmonic perturbation so it is not orthogonal to
/// oscillatory top eigenvectors.
pub fn power_iteration(
    matvec: impl Fn(&Array1<f64>) -> Array1<f64>,
    dim: usize,
    tol: f64,
    max_iter: usize,
) -> f64 {
    assert!(dim > 0);
    let mut v = Array1::from_shape_fn(dim, |i| {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sign * (1.0 + 0.25 * ((i as f64 + 1.0) * 0.7).sin())
    });
    let norm = v.dot(&v).sqrt();
    v.mapv_inplace(|t| t / norm);
    let mut lambda = 0.0f64;
    for _ in 0..max_iter {
        let w = matvec(&v);
        let rayleigh = v.dot(&w);
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
        if (rayleigh - lambda).abs() <= tol * rayleigh.abs().max(1.0) {
            return rayleigh;
        }
        lambda = rayleigh;
    }
    lambda
}

/// All eigenvalues of a small symmetric matrix, ascending, by cyclic Jacobi
/// rotations. Converges quadratically; intended for matrices up to a few
/// hundred rows.
pub fn jacobi_eigenvalues(mat: &Array2<f64>) -> Array1<f64> {
    let n = mat.nrows();
    assert_eq!(n, mat.ncols(), "matrix must be square");
    let mut a = mat.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(&a)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[[i, p]];
                    let aiq = a[[i, q]];
                    a[[i, p]] = c * aip - s * aiq;
                    a[[i, q]] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[[p, i]];
                    let aqi = a[[q, i]];
                    a[[p, i]] = c * api - s * aqi;
                    a[[q, i]] = s * api + c * aqi;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Array1::from(eig)
}

fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|t| t * t).sum::<f64>().sqrt()
}

/// Cholesky factorization of a symmetric positive definite matrix, kept for
/// repeated solves.
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    pub fn factor(a: &Array2<f64>) -> Result<Self, CoreError> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "matrix must be square");
        let mut l = Array2::zeros((n, n));
        for j in 0..n {
            let mut d = a[[j, j]];
            for k in 0..j {
                d -= l[[j, k]] * l[[j, k]];
            }
            if d <= 0.0 {
                return Err(CoreError::InvalidProblem(format!(
                    "matrix not positive definite (pivot {d:.3e} at {j})"
                )));
            }
            l[[j, j]] = d.sqrt();
            for i in (j + 1)..n {
                let mut v = a[[i, j]];
                for k in 0..j {
                    v -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = v / l[[j, j]];
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let n = self.l.nrows();
        assert_eq!(b.len(), n);
        // forward substitution L y = b
        let mut y = Array1::zeros(n);
        for i in 0..n {
            let mut v = b[i];
            for k in 0..i {
                v -= self.l[[i, k]] * y[k];
            }
            y[i] = v / self.l[[i, i]];
        }
        // back substitution Lᵀ x = y
        let mut x = Array1::zeros(n);
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in (i + 1)..n {
                v -= self.l[[k, i]] * x[k];
            }
            x[i] = v / self.l[[i, i]];
        }
        x
    }
}

/// One-shot SPD solve `a x = b`.
pub fn solve_spd(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>, CoreError> {
    Ok(Cholesky::factor(a)?.solve(b))
}
