//! ℓ1 selection among overparametrized logistic-regression classifiers.
//!
//! Raw features are standardized (zero mean, unit variance per column), then
//! lifted to all monomials of total degree at most `lift_degree`, giving
//! `C(p+deg, deg)` columns (30 features at degree 3: 5456). The inner
//! objective is the averaged logistic negative log-likelihood
//!
//! ```math
//! f(x) = (1/n) Σ_i [ ln(1 + exp(â_iᵀx)) − y_i · â_iᵀx ],
//! ```
//!
//! whose gradient is `(1/n)Âᵀ(σ(Âx) − y)` with Lipschitz constant
//! `λ_max(ÂᵀÂ)/(4n)`. The outer objective is `‖x‖₁`, selecting a sparse
//! classifier among the many optimal ones. No closed-form oracle exists;
//! `min F` is estimated by a long accelerated reference run and labeled as
//! such.
//!
//! Monomial ordering is stable and documented: ascending total degree, then
//! lexicographic in the non-decreasing index tuple. The first column is the
//! constant 1.

use std::sync::Arc;

use ndarray::Array1;

use crate::core::{
    power_iteration, BilevelProblem, CompositeObjective, ProxTerm, SmoothTerm,
};

use super::{Dataset, ProblemError};

/// Parameters of the lifted logistic instance.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LogisticLiftSpec {
    /// Expected raw feature count (validated against the dataset).
    pub raw_features: usize,
    /// Maximal total degree of the monomial lift.
    pub lift_degree: usize,
    /// Training rows (taken from the front of the dataset, deterministically).
    pub n_samples: usize,
    /// Standardize columns before lifting.
    pub standardize: bool,
    /// Reject lifts beyond this many columns.
    pub max_dimension: usize,
}

impl Default for LogisticLiftSpec {
    fn default() -> Self {
        Self {
            raw_features: 30,
            lift_degree: 3,
            n_samples: 455,
            standardize: true,
            max_dimension: 20_000,
        }
    }
}

/// `C(p+deg, deg)`: number of monomials of total degree at most `deg` in `p`
/// variables (including the constant).
pub fn lifted_dimension(p: usize, deg: usize) -> usize {
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..deg {
        num *= (p + deg - i) as u128;
        den *= (i + 1) as u128;
    }
    usize::try_from(num / den).expect("lifted dimension overflows usize")
}

/// Non-decreasing index tuples of length 0..=deg, graded by degree then
/// lexicographic. The tuple is the multiset of factor indices of a monomial.
fn monomials(p: usize, deg: usize) -> Vec<Vec<u16>> {
    let mut out: Vec<Vec<u16>> = vec![vec![]];
    let mut level: Vec<Vec<u16>> = vec![vec![]];
    for _ in 0..deg {
        let mut next = Vec::with_capacity(level.len() * p);
        for m in &level {
            let start = m.last().map(|&l| l as usize).unwrap_or(0);
            for i in start..p {
                let mut mm = m.clone();
                mm.push(i as u16);
                next.push(mm);
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

/// Dot product with eight independent accumulators; the manual reassociation
/// is what lets the compiler keep the floating-point pipeline full.
#[inline]
fn dot8(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let j = 8 * c;
        for l in 0..8 {
            acc[l] += a[j + l] * b[j + l];
        }
    }
    let mut s = 0.0;
    for l in 0..8 {
        s += acc[l];
    }
    for j in 8 * chunks..a.len() {
        s += a[j] * b[j];
    }
    s
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t) − y·t`, computed without overflow.
fn logistic_loss(t: f64, y: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p() - y * t
}

struct LiftedData {
    /// `n × d`, row major.
    a: Vec<f64>,
    /// `d × n`, row major (the transpose, for unit-stride gradient products).
    at: Vec<f64>,
    y: Vec<f64>,
    n: usize,
    d: usize,
}

impl LiftedData {
    fn margins(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot8(&self.a[i * self.d..(i + 1) * self.d], x)).collect()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let t = dot8(&self.a[i * self.d..(i + 1) * self.d], x);
            s += logistic_loss(t, self.y[i]);
        }
        s / self.n as f64
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.margins(x);
        for i in 0..self.n {
            r[i] = sigmoid(r[i]) - self.y[i];
        }
        let inv_n = 1.0 / self.n as f64;
        (0..self.d)
            .map(|jc| inv_n * dot8(&self.at[jc * self.n..(jc + 1) * self.n], &r))
            .collect()
    }
}

/// Build the lifted logistic instance. The returned problem has no oracle;
/// attach one with
/// [`with_reference_min_inner`](BilevelProblem::with_reference_min_inner)
/// using [`reference_min_inner`].
pub fn make_logistic_lifted(
    dataset: &Dataset,
    spec: LogisticLiftSpec,
) -> Result<BilevelProblem, ProblemError> {
    if dataset.n_features() != spec.raw_features {
        return Err(ProblemError::BadSpec(format!(
            "dataset has {} features, spec expects {}",
            dataset.n_features(),
            spec.raw_features
        )));
    }
    if spec.lift_degree == 0 {
        return Err(ProblemError::BadSpec("lift degree must be at least 1".into()));
    }
    let d = lifted_dimension(spec.raw_features, spec.lift_degree);
    if d > spec.max_dimension {
        return Err(ProblemError::DimensionOverflow { got: d, cap: spec.max_dimension });
    }
    let train = dataset.head(spec.n_samples)?;
    let n = train.n_samples();
    let p = train.n_features();

    // column statistics on the training split, applied before lifting
    let mut feats = train.features.clone();
    if spec.standardize {
        for jcol in 0..p {
            let mut col = feats.column_mut(jcol);
            let mean = col.sum() / n as f64;
            col.mapv_inplace(|v| v - mean);
            let var = col.dot(&col) / n as f64;
            let sd = var.sqrt();
            if sd > 1e-12 {
                col.mapv_inplace(|v| v / sd);
            }
        }
    }

    let mono = monomials(p, spec.lift_degree);
    debug_assert_eq!(mono.len(), d);
    let mut a = vec![0.0f64; n * d];
    for i in 0..n {
        let row = feats.row(i);
        let dst = &mut a[i * d..(i + 1) * d];
        for (jm, m) in mono.iter().enumerate() {
            let mut v = 1.0;
            for &idx in m {
                v *= row[idx as usize];
            }
            dst[jm] = v;
        }
    }
    let mut at = vec![0.0f64; n * d];
    for i in 0..n {
        for jc in 0..d {
            at[jc * n + i] = a[i * d + jc];
        }
    }
    let data = Arc::new(LiftedData { a, at, y: train.labels.to_vec(), n, d });

    // L_∇f = λ_max(ÂᵀÂ)/(4n), top eigenvalue by power iteration on v ↦ Âᵀ(Âv)
    let pd = Arc::clone(&data);
    let gram_top = power_iteration(
        move |v| {
            let m = pd.margins(v.as_slice().unwrap());
            Array1::from_iter((0..pd.d).map(|jc| dot8(&pd.at[jc * pd.n..(jc + 1) * pd.n], &m)))
        },
        d,
        1e-12,
        2_000,
    );
    let lipschitz = gram_top / (4.0 * n as f64);

    let de = Arc::clone(&data);
    let f = SmoothTerm::new(
        move |x: &Array1<f64>| de.value(x.as_slice().unwrap()),
        {
            let dg = Arc::clone(&data);
            move |x: &Array1<f64>| Array1::from(dg.grad(x.as_slice().unwrap()))
        },
        lipschitz,
    );

    let inner = CompositeObjective::smooth_only(f);
    let outer = CompositeObjective::new(SmoothTerm::zero(), ProxTerm::L1);
    Ok(BilevelProblem::new(
        format!("logistic-lift{}-d{}", spec.lift_degree, d),
        d,
        inner,
        outer,
    )?)
}

/// Estimate `min F` by a long accelerated proximal-gradient run on the inner
/// objective alone (step `1/L`, classic momentum), returning the best value
/// attained. Independent of the bilevel solvers it calibrates.
pub fn reference_min_inner(prob: &BilevelProblem, iters: usize) -> f64 {
    let l = prob.inner.smooth.lipschitz;
    assert!(l > 0.0, "inner objective must have a positive Lipschitz constant");
    let s = 1.0 / l;
    let dim = prob.dimension;
    let mut x = Array1::zeros(dim);
    let mut x_prev = x.clone();
    let mut t = 1.0f64;
    let mut best = prob.inner.value(&x);
    for _ in 0..iters {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let y = &x + &((&x - &x_prev) * beta);
        let g = prob.inner.smooth.grad(&y);
        let v = &y - &(g * s);
        let x_next = prob.inner.prox.prox(s, &v);
        x_prev = x;
        x = x_next;
        t = t_next;
        let fx = prob.inner.value(&x);
        if fx < best {
            best = fx;
        }
    }
    best
}

/// Attach a reference `min F` oracle produced by [`reference_min_inner`].
pub fn with_reference_oracle(prob: BilevelProblem, iters: usize) -> BilevelProblem {
    let v = reference_min_inner(&prob, iters);
    prob.with_reference_min_inner(v)
}
