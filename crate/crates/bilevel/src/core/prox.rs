//! Proximal terms and their proximal maps.
//!
//! The proximal map of a proper closed convex `g` with step `s > 0` is
//!
//! ```math
//! prox_{s·g}(v) = argmin_y { s·g(y) + ½‖y − v‖² }.
//! ```
//!
//! Solvers need the prox of the *combined* nonsmooth part `f̂ + ε·ĥ`. That is
//! supported in four situations (anything else is an error, not an
//! approximation): either part vanishes, a joint prox was registered by the
//! caller, or both parts are coordinate-separable library terms, in which case
//! the combination reduces to exact scalar formulas.

use ndarray::Array1;

use super::CoreError;

type CustomEval = Box<dyn Fn(&Array1<f64>) -> f64 + Send + Sync>;
type CustomProx = Box<dyn Fn(f64, &Array1<f64>) -> Array1<f64> + Send + Sync>;

/// A proper closed convex term accessed through its value and proximal map.
///
/// The library variants carry exact closed-form proxes; `Custom` wraps
/// caller-supplied callbacks and is treated as opaque (it cannot take part in
/// separable combination).
pub enum ProxTerm {
    /// The zero function; prox is the identity.
    Zero,
    /// `‖x‖₁`; prox is coordinatewise soft thresholding.
    L1,
    /// `‖x − shift‖₁`; soft thresholding around `shift`.
    ShiftedL1 { shift: Array1<f64> },
    /// Indicator of the box `[lo, hi]^d`; prox is clamping. Bounds may be
    /// infinite on either side but must satisfy `lo <= hi`.
    Box { lo: f64, hi: f64 },
    /// `½‖x‖²`; prox is uniform shrinkage `v/(1+s)`.
    SqNorm,
    /// Caller-supplied value and prox callbacks.
    Custom { eval: CustomEval, prox: CustomProx },
}

impl ProxTerm {
    pub fn custom(
        eval: impl Fn(&Array1<f64>) -> f64 + Send + Sync + 'static,
        prox: impl Fn(f64, &Array1<f64>) -> Array1<f64> + Send + Sync + 'static,
    ) -> Self {
        ProxTerm::Custom { eval: Box::new(eval), prox: Box::new(prox) }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ProxTerm::Zero)
    }

    /// Function value; `+∞` outside the domain of an indicator.
    pub fn eval(&self, x: &Array1<f64>) -> f64 {
        match self {
            ProxTerm::Zero => 0.0,
            ProxTerm::L1 => x.iter().map(|v| v.abs()).sum(),
            ProxTerm::ShiftedL1 { shift } => {
                assert_eq!(shift.len(), x.len(), "shift dimension mismatch");
                x.iter().zip(shift.iter()).map(|(v, c)| (v - c).abs()).sum()
            }
            ProxTerm::Box { lo, hi } => {
                if x.iter().all(|v| *v >= *lo && *v <= *hi) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxTerm::SqNorm => 0.5 * x.dot(x),
            ProxTerm::Custom { eval, .. } => eval(x),
        }
    }

    /// `prox_{s·g}(v)` with `s > 0` (s = 0 returns `v` unchanged).
    pub fn prox(&self, s: f64, v: &Array1<f64>) -> Array1<f64> {
        assert!(s >= 0.0 && s.is_finite(), "prox step must be finite and nonnegative");
        if s == 0.0 && !matches!(self, ProxTerm::Box { .. }) {
            // box indicators still project at s = 0; everything else is exact identity
            return v.clone();
        }
        match self {
            ProxTerm::Zero => v.clone(),
            ProxTerm::L1 => v.mapv(|t| soft_threshold(t, s)),
            ProxTerm::ShiftedL1 { shift } => {
                assert_eq!(shift.len(), v.len(), "shift dimension mismatch");
                let mut out = v.clone();
                out.iter_mut()
                    .zip(shift.iter())
                    .for_each(|(t, c)| *t = c + soft_threshold(*t - c, s));
                out
            }
            ProxTerm::Box { lo, hi } => v.mapv(|t| t.clamp(*lo, *hi)),
            ProxTerm::SqNorm => v.mapv(|t| t / (1.0 + s)),
            ProxTerm::Custom { prox, .. } => prox(s, v),
        }
    }

    /// The scalar building block at coordinate `i`, when this term is a
    /// coordinate-separable library entry. `None` for `Custom`.
    pub fn scalar_piece(&self, i: usize) -> Option<ScalarPiece> {
        match self {
            ProxTerm::Zero => Some(ScalarPiece::Nothing),
            ProxTerm::L1 => Some(ScalarPiece::Abs { center: 0.0 }),
            ProxTerm::ShiftedL1 { shift } => Some(ScalarPiece::Abs { center: shift[i] }),
            ProxTerm::Box { lo, hi } => Some(ScalarPiece::Interval { lo: *lo, hi: *hi }),
            ProxTerm::SqNorm => Some(ScalarPiece::HalfSquare),
            ProxTerm::Custom { .. } => None,
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            ProxTerm::Zero => "zero",
            ProxTerm::L1 => "l1",
            ProxTerm::ShiftedL1 { .. } => "shifted-l1",
            ProxTerm::Box { .. } => "box",
            ProxTerm::SqNorm => "sq-norm",
            ProxTerm::Custom { .. } => "custom",
        }
    }
}

impl std::fmt::Debug for ProxTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ProxTerm::{}", self.kind_name())
    }
}

fn soft_threshold(t: f64, s: f64) -> f64 {
    if t > s {
        t - s
    } else if t < -s {
        t + s
    } else {
        0.0
    }
}

/// One coordinate's contribution of a separable prox term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarPiece {
    Nothing,
    /// `|y − center|`
    Abs { center: f64 },
    /// `½y²`
    HalfSquare,
    /// indicator of `[lo, hi]`
    Interval { lo: f64, hi: f64 },
}

/// Joint prox of `s·(f̂ + ε·ĥ)` registered by a caller for combinations with
/// no separable closed form; arguments are `(s, eps, v)`.
pub type JointProxFn = dyn Fn(f64, f64, &Array1<f64>) -> Array1<f64> + Send + Sync;

/// Proximal map of the weighted sum `s·f̂ + s·eps·ĥ` at `v`.
///
/// Supported exactly in four cases, tried in order: `f̂ ≡ 0`; `ĥ ≡ 0` or
/// `eps = 0`; a registered joint prox; both terms coordinate-separable library
/// entries. Otherwise `UnsupportedProxCombination` — there is no silent
/// splitting approximation here.
pub fn combined_prox(
    fhat: &ProxTerm,
    hhat: &ProxTerm,
    joint: Option<&JointProxFn>,
    s: f64,
    eps: f64,
    v: &Array1<f64>,
) -> Result<Array1<f64>, CoreError> {
    assert!(s > 0.0 && s.is_finite(), "prox step must be positive and finite");
    assert!(eps >= 0.0, "regularization weight must be nonnegative");
    if hhat.is_zero() || eps == 0.0 {
        return Ok(fhat.prox(s, v));
    }
    if fhat.is_zero() {
        return Ok(hhat.prox(s * eps, v));
    }
    if let Some(j) = joint {
        return Ok(j(s, eps, v));
    }
    // both nonzero and no joint prox: require separable library terms
    let (fp0, hp0) = match (fhat.scalar_piece(0), hhat.scalar_piece(0)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(CoreError::UnsupportedProxCombination(format!(
                "{:?} + eps*{:?} (register a joint prox)",
                fhat, hhat
            )))
        }
    };
    let _ = (fp0, hp0);
    let mut out = Array1::zeros(v.len());
    for i in 0..v.len() {
        let a = fhat.scalar_piece(i).unwrap();
        let b = hhat.scalar_piece(i).unwrap();
        out[i] = combined_scalar_prox(s, a, s * eps, b, v[i])?;
    }
    Ok(out)
}

/// Exact minimizer over `y` of `w1·p1(y) + w2·p2(y) + ½(y − v)²`.
fn combined_scalar_prox(
    w1: f64,
    p1: ScalarPiece,
    w2: f64,
    p2: ScalarPiece,
    v: f64,
) -> Result<f64, CoreError> {
    use ScalarPiece::*;
    match (p1, p2) {
        (Nothing, q) => Ok(single_scalar_prox(w2, q, v)?),
        (q, Nothing) => Ok(single_scalar_prox(w1, q, v)?),
        // absorb a quadratic: w·½y² + ½(y−v)² = (1+w)/2·(y − v/(1+w))² + const
        (HalfSquare, q) => {
            combined_scalar_prox(w2 / (1.0 + w1), q, 0.0, Nothing, v / (1.0 + w1))
        }
        (q, HalfSquare) => {
            combined_scalar_prox(w1 / (1.0 + w2), q, 0.0, Nothing, v / (1.0 + w2))
        }
        // an interval constraint clamps the other piece's unconstrained prox:
        // scalar convex functions are unimodal, so the constrained minimizer is
        // the projection of the unconstrained one
        (Interval { lo, hi }, q) | (q, Interval { lo, hi }) => {
            if lo > hi {
                return Err(CoreError::EmptyDomain(format!("interval [{lo}, {hi}]")));
            }
            let (w, piece) = if matches!(p1, Interval { .. }) { (w2, q) } else { (w1, q) };
            let y = match piece {
                Interval { lo: lo2, hi: hi2 } => {
                    // intersection of two boxes
                    let l = lo.max(lo2);
                    let h = hi.min(hi2);
                    if l > h {
                        return Err(CoreError::EmptyDomain(format!(
                            "interval intersection [{l}, {h}]"
                        )));
                    }
                    return Ok(v.clamp(l, h));
                }
                _ => single_scalar_prox(w, piece, v)?,
            };
            Ok(y.clamp(lo, hi))
        }
        (Abs { center: c1 }, Abs { center: c2 }) => Ok(two_kink_prox(w1, c1, w2, c2, v)),
    }
}

fn single_scalar_prox(w: f64, p: ScalarPiece, v: f64) -> Result<f64, CoreError> {
    use ScalarPiece::*;
    Ok(match p {
        Nothing => v,
        Abs { center } => center + soft_threshold(v - center, w),
        HalfSquare => v / (1.0 + w),
        Interval { lo, hi } => {
            if lo > hi {
                return Err(CoreError::EmptyDomain(format!("interval [{lo}, {hi}]")));
            }
            v.clamp(lo, hi)
        }
    })
}

/// Minimizer of `a·|y − c1| + b·|y − c2| + ½(y − v)²` for `a, b >= 0`.
///
/// The objective is piecewise quadratic with kinks at `c1`, `c2`; exactly one
/// of the five optimality cases below fires, by convexity.
fn two_kink_prox(a: f64, c1: f64, b: f64, c2: f64, v: f64) -> f64 {
    let (a, c1, b, c2) = if c1 <= c2 { (a, c1, b, c2) } else { (b, c2, a, c1) };
    if v < c1 - a - b {
        v + a + b
    } else if v <= c1 + a - b {
        c1
    } else if v < c2 + a - b {
        v - a + b
    } else if v <= c2 + a + b {
        c2
    } else {
        v - a - b
    }
}
