//! All five solvers on the worst-case smooth instance, side by side.
//!
//! The inner objective is the chain quadratic whose spectrum makes
//! first-order methods exhibit their worst `O(1/k)` / `O(1/k²)` behavior
//! while `k` stays below the square of the chain length, and the outer
//! objective is an anchored ridge picking one point of the inner solution
//! set. Each method runs with the same budget and its recommended schedule
//! exponent (momentum methods take `δ`, the others `δ/2`, which balances
//! the two error sources in each regime).
//!
//! Expected picture: the accelerated vanishing-regularization methods drive
//! the inner residual orders of magnitude below the plain one at equal
//! budget and contract the distance to the selected solution, while the
//! baselines trail with their own constants; on this adversarial instance
//! the adaptive baseline's residual can even stagnate once regularization
//! pressure dominates.

use bilevel::algorithms::{run, Method, SolverConfig};
use bilevel::core::Schedule;
use bilevel::diagnostics::{fit_rate, TraceField};
use bilevel::problems::{make_nemirovsky, NemirovskySpec};
use ndarray::Array1;

fn main() {
    let prob = make_nemirovsky(NemirovskySpec::default()).unwrap();
    let x0 = Array1::zeros(prob.dimension);
    let d0 = prob.dist_to_solution(&x0).unwrap();
    let max_iter = 10_000;
    let delta = 1.5;

    println!(
        "{:<8} {:>12} {:>12} {:>13} {:>9}",
        "method", "F residual", "|H gap|", "dist/initial", "F slope"
    );
    // note: the rewritten accelerated method (fbipg) pins its schedule to
    // c = 1, beta = gamma = alpha - 1 by construction, so its outer progress
    // differs from the freely parametrized momentum row even at equal delta
    for method in [Method::Bpg, Method::Bfpg, Method::Fbipg, Method::Stabim, Method::Bisg2] {
        // halve the exponent for methods without momentum; the two-stage
        // baseline additionally caps the schedule scale at min(1/L_∇h, 1)
        let d_used = if method.is_momentum() { delta } else { delta / 2.0 };
        let c = if method == Method::Bisg2 { 1.0 } else { 10.0 };
        let sched = Schedule::new(c, d_used, 10.0).unwrap();
        let mut cfg = SolverConfig::new(method, sched, max_iter);
        cfg.gamma = 20.0;
        let trace = run(&prob, &cfg, &x0).unwrap();
        let last = trace.final_record();
        let fit = fit_rate(&trace, TraceField::FRes, (max_iter / 10, max_iter)).unwrap();
        println!(
            "{:<8} {:>12.3e} {:>12.3e} {:>13.4} {:>9.3}",
            method.key(),
            last.f_res,
            last.h_gap.abs(),
            last.dist.unwrap() / d0,
            fit.slope,
        );
    }
}
