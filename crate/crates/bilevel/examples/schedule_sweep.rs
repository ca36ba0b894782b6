//! The schedule exponent trades inner speed against outer tracking.
//!
//! With `ε_k = c/(k+β)^δ` the accelerated method's inner residual is bounded
//! by `O(k^{δ-2})`, so larger `δ` (faster-vanishing regularization) speeds up
//! the inner problem. The outer objective pulls the other way: the iterates
//! track the Tikhonov path `x_{ε_k}`, whose outer value approaches the
//! optimal selection like `Θ(ε_k)`, so the measured outer gap shrinks like
//! `k^{-δ}` and smaller `δ` gives stronger selection pressure early on.
//!
//! This example sweeps `δ` over the admissible range on the minimum-norm toy
//! (least squares inner, `½‖x‖²` outer, exact pseudoinverse oracle) and fits
//! both slopes, making the trade-off visible in one table.

use bilevel::algorithms::{run, Method, SolverConfig};
use bilevel::core::Schedule;
use bilevel::diagnostics::{fit_rate, TraceField};
use bilevel::problems::make_min_norm_toy;
use ndarray::Array1;

fn main() {
    let prob = make_min_norm_toy(8, 20, 7).unwrap();
    let x0 = Array1::zeros(prob.dimension);
    let max_iter = 10_000;

    println!(
        "{:<7} {:>14} {:>14} {:>12}",
        "delta", "F slope", "|H gap| slope", "distance"
    );
    for delta in [1.2, 1.5, 1.8] {
        let sched = Schedule::new(10.0, delta, 10.0).unwrap();
        let mut cfg = SolverConfig::new(Method::Bfpg, sched, max_iter);
        cfg.gamma = 20.0;
        let trace = run(&prob, &cfg, &x0).unwrap();
        let window = (max_iter / 10, max_iter);
        let f_fit = fit_rate(&trace, TraceField::FRes, window).unwrap();
        let h_fit = fit_rate(&trace, TraceField::AbsHGap, window).unwrap();
        println!(
            "{:<7} {:>7.3} ({:>4.2}) {:>7.3} ({:>4.2}) {:>12.3e}",
            delta,
            f_fit.slope,
            f_fit.r2,
            h_fit.slope,
            h_fit.r2,
            trace.final_record().dist.unwrap(),
        );
    }
    println!();
    println!("larger delta: steeper inner residual, slower outer selection");
}
