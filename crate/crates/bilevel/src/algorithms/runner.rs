//! Driving a configured method for a fixed number of iterations.

use std::time::Instant;

use ndarray::Array1;

use crate::core::BilevelProblem;
use crate::diagnostics::{RunTrace, StoragePolicy, TraceMeta, TraceRecord};

use super::{step, AlgorithmError, SolverConfig, SolverState};

/// Run the configured method from `x0`, recording one trace row per index
/// `k = 0..=max_iter`. Row 0 is the starting point; for momentum methods row
/// 1 repeats it (the pair `x_0, x_1` seeds the extrapolation), so those
/// methods take `max_iter − 1` proximal steps. Deterministic: identical
/// inputs give identical traces.
pub fn run(
    prob: &BilevelProblem,
    cfg: &SolverConfig,
    x0: &Array1<f64>,
) -> Result<RunTrace, AlgorithmError> {
    run_with_observer(prob, cfg, x0, |_, _, _| None)
}

/// As [`run`], invoking `observer(k, x_k, x_{k−1})` at every recorded row;
/// its return value lands in the row's energy column. At `k = 0` both
/// arguments are the starting point.
pub fn run_with_observer(
    prob: &BilevelProblem,
    cfg: &SolverConfig,
    x0: &Array1<f64>,
    mut observer: impl FnMut(usize, &Array1<f64>, &Array1<f64>) -> Option<f64>,
) -> Result<RunTrace, AlgorithmError> {
    if x0.len() != prob.dimension {
        return Err(AlgorithmError::InvalidConfig(format!(
            "starting point has dimension {}, problem expects {}",
            x0.len(),
            prob.dimension
        )));
    }
    cfg.validate(prob)?;
    let started = Instant::now();
    let normalized = cfg.normalized()?;
    let step_size = normalized.resolved_step(prob)?;
    let rows = cfg.max_iter + 1;
    let storage = StoragePolicy::for_size(prob.dimension, rows);
    let momentum = normalized.method.is_momentum();

    let meta = |wall_ms: u128| TraceMeta {
        problem_id: prob.id.clone(),
        dimension: prob.dimension,
        method: cfg.method.key().to_string(),
        config: serde_json::to_value(cfg).expect("solver config serializes"),
        resolved_step: step_size,
        storage,
        wall_ms,
        min_inner_reference_only: prob
            .oracle
            .as_ref()
            .map(|o| o.reference_only)
            .unwrap_or(false),
    };

    let mut records: Vec<TraceRecord> = Vec::with_capacity(rows);
    let last = cfg.max_iter;
    let emit =
        |records: &mut Vec<TraceRecord>,
         k: usize,
         x: &Array1<f64>,
         x_prev: &Array1<f64>,
         observer: &mut dyn FnMut(usize, &Array1<f64>, &Array1<f64>) -> Option<f64>| {
            let diff = x - x_prev;
            records.push(TraceRecord {
                k,
                x: storage.keeps(k, last).then(|| x.clone()),
                f_res: prob.inner_residual(x),
                h_gap: prob.outer_gap(x),
                dist: prob.dist_to_solution(x),
                eps: normalized.epsilon_at(k),
                step_norm: diff.dot(&diff).sqrt(),
                e_lambda: observer(k, x, x_prev),
            });
        };

    let mut state = SolverState::init(&normalized, x0);
    let mut prev = x0.clone();
    emit(&mut records, 0, x0, x0, &mut observer);
    for k in 1..=cfg.max_iter {
        if momentum && k == 1 {
            // x_1 := x_0 by convention; no proximal step is taken
        } else if let Err(source) = step(prob, &normalized, step_size, &mut state) {
            let wall_ms = started.elapsed().as_millis();
            return Err(AlgorithmError::StepFailed {
                at: k,
                source,
                partial: Box::new(RunTrace { meta: meta(wall_ms), records }),
            });
        }
        emit(&mut records, k, &state.x_curr, &prev, &mut observer);
        prev.assign(&state.x_curr);
    }

    let wall_ms = started.elapsed().as_millis();
    Ok(RunTrace { meta: meta(wall_ms), records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::Method;
    use crate::core::{one_dim_quadratics, ProxTerm, Schedule};
    use crate::core::{BilevelProblem, CompositeObjective, SmoothTerm};
    use crate::diagnostics::TraceField;
    use crate::problems::{make_min_norm_toy, make_nemirovsky, NemirovskySpec};
    use ndarray::arr1;

    fn unit_schedule() -> Schedule {
        Schedule::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_iterations_records_only_the_start() {
        let prob = one_dim_quadratics();
        let cfg = SolverConfig::new(Method::Bpg, unit_schedule(), 0);
        let t = run(&prob, &cfg, &arr1(&[3.0])).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.records[0].step_norm, 0.0);
        assert_eq!(t.iterate(0).unwrap()[0], 3.0);
    }

    #[test]
    fn trace_has_max_iter_plus_one_rows_for_every_method() {
        let prob = one_dim_quadratics();
        for method in [Method::Bpg, Method::Bfpg, Method::Fbipg, Method::Stabim, Method::Bisg2] {
            let cfg = SolverConfig::new(method, unit_schedule(), 10);
            let t = run(&prob, &cfg, &arr1(&[1.0])).unwrap();
            assert_eq!(t.len(), 11, "{method}");
            for (i, r) in t.records.iter().enumerate() {
                assert_eq!(r.k, i);
            }
        }
    }

    #[test]
    fn momentum_row_one_repeats_the_start() {
        let prob = one_dim_quadratics();
        let cfg = SolverConfig::new(Method::Bfpg, unit_schedule(), 3).with_step(0.5);
        let t = run(&prob, &cfg, &arr1(&[1.0])).unwrap();
        assert_eq!(t.iterate(1).unwrap()[0], 1.0);
        assert_eq!(t.records[1].step_norm, 0.0);
        assert!((t.iterate(2).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unaccelerated_hand_trace() {
        // θ = 1: x_1 = 0 (hand value), then x_2 = 0 − 1·(0 + ε_1(0−1)) = ½.
        let prob = one_dim_quadratics();
        let cfg = SolverConfig::new(Method::Bpg, unit_schedule(), 2).with_step(1.0);
        let t = run(&prob, &cfg, &arr1(&[1.0])).unwrap();
        assert!((t.iterate(1).unwrap()[0]).abs() < 1e-15);
        assert!((t.iterate(2).unwrap()[0] - 0.5).abs() < 1e-15);
        assert!((t.records[1].eps - 0.5).abs() < 1e-15, "row k stores ε_k");
    }

    #[test]
    fn pinned_variant_trace_equals_rewritten_general_trace() {
        let prob = make_min_norm_toy(3, 6, 7).unwrap();
        let pinned = SolverConfig::new(
            Method::Fbipg,
            Schedule::new(123.0, 1.5, 99.0).unwrap(), // c and β are overridden
            200,
        )
        .with_alpha(4.0);
        let general = SolverConfig::new(Method::Bfpg, Schedule::new(1.0, 1.5, 3.0).unwrap(), 200)
            .with_alpha(4.0)
            .with_gamma(3.0);
        let tp = run(&prob, &pinned, &Array1::zeros(6)).unwrap();
        let tg = run(&prob, &general, &Array1::zeros(6)).unwrap();
        for k in 0..tp.len() {
            let a = tp.iterate(k).unwrap();
            let b = tg.iterate(k).unwrap();
            for i in 0..6 {
                assert_eq!(a[i], b[i], "k={k} i={i}");
            }
        }
    }

    #[test]
    fn accelerated_zero_schedule_matches_independent_transcription() {
        // ε ≡ 0 reduces the accelerated method to momentum proximal gradient
        // on f alone; transcribe that scheme from its description and compare.
        let prob = make_min_norm_toy(2, 4, 3).unwrap();
        let alpha = 4.0;
        let gamma = 2.0;
        let s = 0.9 / prob.inner.smooth.lipschitz;
        let cfg = SolverConfig::new(Method::Bfpg, Schedule::zero(), 100)
            .with_alpha(alpha)
            .with_gamma(gamma)
            .with_step(s);
        let x0 = arr1(&[1.0, -2.0, 0.5, 3.0]);
        let t = run(&prob, &cfg, &x0).unwrap();

        let mut x = x0.clone();
        let mut x_prev = x0.clone();
        for k in 1..=99usize {
            let ak = 1.0 - alpha / (k as f64 + gamma + 1.0);
            let y = &x + &((&x - &x_prev) * ak);
            let g = prob.inner.smooth.grad(&y);
            let x_next = &y - &(g * s);
            x_prev = x;
            x = x_next;
            let stored = t.iterate(k + 1).unwrap();
            for i in 0..4 {
                assert!(
                    (stored[i] - x[i]).abs() < 1e-12,
                    "k={} i={} {} vs {}",
                    k + 1,
                    i,
                    stored[i],
                    x[i]
                );
            }
        }
    }

    #[test]
    fn unaccelerated_zero_schedule_satisfies_descent_bound() {
        // gradient descent on the inner objective: monotone values and the
        // classical F(x_k) − min F ≤ ‖x_0 − x*‖²/(2θk) bound for θ ≤ 1/L
        let prob = make_nemirovsky(NemirovskySpec { d: 30, j: 5, anchor: 10.0 }).unwrap();
        let theta = 1.0 / prob.inner.smooth.lipschitz;
        let cfg = SolverConfig::new(Method::Bpg, Schedule::zero(), 400).with_step(theta);
        let x0 = Array1::zeros(30);
        let t = run(&prob, &cfg, &x0).unwrap();
        let xs = prob.oracle.as_ref().unwrap().x_star.as_ref().unwrap();
        let d0 = {
            let d = &x0 - xs;
            d.dot(&d)
        };
        let mut last = f64::INFINITY;
        for r in &t.records {
            assert!(r.f_res <= last + 1e-15, "descent broken at k={}", r.k);
            last = r.f_res;
            if r.k >= 1 {
                let bound = d0 / (2.0 * theta * r.k as f64);
                assert!(r.f_res <= bound * (1.0 + 1e-9), "k={}: {} > {bound}", r.k, r.f_res);
            }
        }
    }

    #[test]
    fn accelerated_zero_schedule_has_quadratic_rate() {
        // k²·(F(x_k) − min F) stays bounded: compare the tail against the
        // level established over the first few indices
        let prob = make_nemirovsky(NemirovskySpec { d: 30, j: 5, anchor: 10.0 }).unwrap();
        let cfg = SolverConfig::new(Method::Bfpg, Schedule::zero(), 1000);
        let t = run(&prob, &cfg, &Array1::zeros(30)).unwrap();
        let scaled: Vec<f64> =
            t.records.iter().skip(2).map(|r| (r.k * r.k) as f64 * r.f_res).collect();
        let head = scaled.iter().take(20).cloned().fold(0.0f64, f64::max);
        let tail = scaled.iter().skip(100).cloned().fold(0.0f64, f64::max);
        assert!(
            tail <= 5.0 * head.max(1e-12),
            "k²·residual grew: head {head}, tail {tail}"
        );
    }

    #[test]
    fn box_constraints_hold_at_every_iterate() {
        // outer prox is a box indicator: iterates stay inside the box for
        // every positive schedule value
        let f = SmoothTerm::new(
            |x: &Array1<f64>| 0.5 * ((x[0] - 3.0).powi(2) + (x[1] + 2.0).powi(2)),
            |x: &Array1<f64>| arr1(&[x[0] - 3.0, x[1] + 2.0]),
            1.0,
        );
        let prob = BilevelProblem::new(
            "boxed",
            2,
            CompositeObjective::smooth_only(f),
            CompositeObjective::new(SmoothTerm::zero(), ProxTerm::Box { lo: 0.0, hi: 1.0 }),
        )
        .unwrap();
        for method in [Method::Bpg, Method::Bfpg, Method::Stabim] {
            let cfg = SolverConfig::new(method, unit_schedule(), 60);
            let t = run(&prob, &cfg, &arr1(&[0.5, 0.5])).unwrap();
            for r in &t.records {
                let x = r.x.as_ref().unwrap();
                assert!(
                    (0.0..=1.0).contains(&x[0]) && (0.0..=1.0).contains(&x[1]),
                    "{method} left the box at k={}: {x}",
                    r.k
                );
            }
        }
    }

    #[test]
    fn reruns_are_bit_identical() {
        let prob = make_min_norm_toy(3, 8, 11).unwrap();
        let cfg = SolverConfig::new(Method::Bfpg, Schedule::new(2.0, 1.5, 1.0).unwrap(), 50);
        let x0 = Array1::zeros(8);
        let a = run(&prob, &cfg, &x0).unwrap();
        let b = run(&prob, &cfg, &x0).unwrap();
        for k in 0..a.len() {
            let (ra, rb) = (&a.records[k], &b.records[k]);
            assert_eq!(ra.f_res.to_bits(), rb.f_res.to_bits());
            assert_eq!(ra.h_gap.to_bits(), rb.h_gap.to_bits());
            assert_eq!(ra.step_norm.to_bits(), rb.step_norm.to_bits());
            let (xa, xb) = (ra.x.as_ref().unwrap(), rb.x.as_ref().unwrap());
            for i in 0..8 {
                assert_eq!(xa[i].to_bits(), xb[i].to_bits());
            }
        }
    }

    #[test]
    fn exact_oracle_residuals_never_undershoot() {
        let prob = make_min_norm_toy(3, 8, 5).unwrap();
        let min_inner = prob.oracle.as_ref().unwrap().min_inner.unwrap();
        let tol = 1e-10 * (1.0 + min_inner.abs());
        let cfg = SolverConfig::new(Method::Bfpg, Schedule::new(1.0, 1.5, 1.0).unwrap(), 500);
        let t = run(&prob, &cfg, &Array1::zeros(8)).unwrap();
        for r in &t.records {
            assert!(r.f_res >= -tol, "k={}: F residual {} undershoots", r.k, r.f_res);
        }
    }

    #[test]
    fn step_failure_carries_partial_trace() {
        // two custom prox parts cannot be combined; the first proximal step
        // fails and reports the rows recorded so far
        let custom = || {
            ProxTerm::custom(
                |x: &Array1<f64>| x.iter().map(|v| v.abs()).sum(),
                |_s: f64, v: &Array1<f64>| v.clone(),
            )
        };
        let f = SmoothTerm::new(
            |x: &Array1<f64>| 0.5 * x.dot(x),
            |x: &Array1<f64>| x.clone(),
            1.0,
        );
        let prob = BilevelProblem::new(
            "uncombinable",
            2,
            CompositeObjective::new(f, custom()),
            CompositeObjective::new(SmoothTerm::zero(), custom()),
        )
        .unwrap();
        let cfg = SolverConfig::new(Method::Bpg, unit_schedule(), 5);
        match run(&prob, &cfg, &arr1(&[1.0, 1.0])) {
            Err(AlgorithmError::StepFailed { at, partial, .. }) => {
                assert_eq!(at, 1);
                assert_eq!(partial.len(), 1);
            }
            other => panic!("expected step failure, got {other:?}"),
        }
    }

    #[test]
    fn observer_values_land_in_the_energy_column() {
        let prob = one_dim_quadratics();
        let cfg = SolverConfig::new(Method::Bpg, unit_schedule(), 3).with_step(0.5);
        let t = run_with_observer(&prob, &cfg, &arr1(&[1.0]), |k, x, xp| {
            Some(k as f64 + x[0] - xp[0])
        })
        .unwrap();
        let series = t.series(TraceField::ELambda);
        assert_eq!(series.len(), 4);
        assert_eq!(series[0], (0, 0.0));
    }
}
