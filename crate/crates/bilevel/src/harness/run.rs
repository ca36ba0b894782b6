//! The `run` command: execute a batch of solver cells.
//!
//! Every (method × sweep value) cell runs independently, owns its trace CSV,
//! and reports one manifest entry; the manifest itself is written once after
//! all cells finish. Configuration problems abort the whole batch before any
//! cell starts, while failures inside an individual run (a proximal step
//! without a closed form, say) are recorded in that cell's entry and leave
//! the other cells untouched.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use ndarray::Array1;

use crate::algorithms::{run_with_observer, AlgorithmError, Method, SolverConfig};
use crate::core::{BilevelProblem, Schedule};
use crate::diagnostics::{
    best_iterate, check_dissipation_first, check_dissipation_second, check_holder_growth,
    lyapunov_first, lyapunov_second, BestChoice, EnergyOrder, LyapunovParams, RunTrace,
};

use super::config::PlannedRun;
use super::store::{manifest_path, write_run_csv, Manifest, ManifestRun, RunKind, RunStatus};
use super::{plan_solver_cells, DiagnosticsFlags, ExperimentConfig, HarnessError};

/// Batch execution switches shared by the run, compare, and flow commands.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Overwrite an output directory that already holds a manifest.
    pub force: bool,
    /// Concurrent cells (1 = serial).
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { force: false, jobs: 1 }
    }
}

/// What a batch produced.
#[derive(Debug)]
pub struct RunSummary {
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

impl RunSummary {
    /// Cells that ended in a failure state.
    pub fn failures(&self) -> usize {
        self.manifest.failures()
    }
}

/// Execute every configured solver cell and write traces plus the manifest.
///
/// Refuses to touch an output directory that already holds a manifest unless
/// `force` is set, so a finished batch is never clobbered by accident.
pub fn cmd_run(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    let prob = cfg.build_problem()?;
    run_batch_on(cfg, &prob, opts)
}

/// [`cmd_run`] against an already-built problem instance.
pub(crate) fn run_batch_on(
    cfg: &ExperimentConfig,
    prob: &BilevelProblem,
    opts: &RunOptions,
) -> Result<RunSummary, HarnessError> {
    let plan = plan_solver_cells(cfg, prob)?;
    let x0 = cfg.x0.materialize(prob.dimension)?;
    for cell in &plan {
        cell.solver.validate(prob).map_err(|e| {
            HarnessError::Validation(format!(
                "methods[{}] (run {}): {e}",
                cell.method_index, cell.id
            ))
        })?;
    }
    prepare_output_dir(&cfg.output_dir, opts.force)?;
    let runs = run_cells(plan.len(), opts.jobs, |i| {
        execute_solver_cell(cfg, prob, &plan[i], &x0)
    });
    let manifest = Manifest::new(cfg.clone(), runs);
    let manifest_path = manifest.save(&cfg.output_dir)?;
    Ok(RunSummary { manifest_path, manifest })
}

/// Create the output directory, refusing to overwrite a finished batch.
pub(crate) fn prepare_output_dir(dir: &Path, force: bool) -> Result<(), HarnessError> {
    if manifest_path(dir).exists() && !force {
        return Err(HarnessError::Io(format!(
            "output directory {} already holds a manifest; pass --force to overwrite",
            dir.display()
        )));
    }
    std::fs::create_dir_all(dir)
        .map_err(|e| HarnessError::Io(format!("creating {}: {e}", dir.display())))
}

/// Run `f(0..n)` on up to `jobs` worker threads, preserving index order in
/// the result. Cells are handed out from a shared counter, so long and short
/// runs interleave without any scheduling policy.
pub(crate) fn run_cells<T, F>(n: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let jobs = jobs.max(1).min(n.max(1));
    if jobs == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<T>>> =
        Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                results.lock().expect("no panics while holding the lock")[i] = Some(out);
            });
        }
    });
    results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|slot| slot.expect("every cell ran"))
        .collect()
}

/// Which discrete energy, if any, applies to a method.
fn energy_order(method: Method) -> Option<EnergyOrder> {
    match method {
        Method::Bpg => Some(EnergyOrder::First),
        Method::Bfpg | Method::Fbipg => Some(EnergyOrder::Second),
        Method::Stabim | Method::Bisg2 => None,
    }
}

/// Energy evaluation context for one cell: the normalized schedule and the
/// time-scale parameters the discrete energies are defined with.
struct EnergyContext {
    order: EnergyOrder,
    sched: Schedule,
    params: LyapunovParams,
}

fn energy_context(
    prob: &BilevelProblem,
    solver: &SolverConfig,
    notes: &mut Vec<String>,
) -> Option<EnergyContext> {
    let order = match energy_order(solver.method) {
        Some(order) => order,
        None => {
            notes.push(format!(
                "lyapunov diagnostics skipped: no discrete energy is defined for {}",
                solver.method
            ));
            return None;
        }
    };
    if prob.oracle.as_ref().and_then(|o| o.x_star.as_ref()).is_none() {
        notes.push("lyapunov diagnostics skipped: the oracle has no solution point".into());
        return None;
    }
    let norm = match solver.normalized() {
        Ok(n) => n,
        Err(e) => {
            notes.push(format!("lyapunov diagnostics skipped: {e}"));
            return None;
        }
    };
    let step = match norm.resolved_step(prob) {
        Ok(s) => s,
        Err(e) => {
            notes.push(format!("lyapunov diagnostics skipped: {e}"));
            return None;
        }
    };
    let params = match order {
        EnergyOrder::First => LyapunovParams::first_order(step, norm.gamma),
        EnergyOrder::Second => LyapunovParams::second_order(step, norm.alpha, norm.gamma),
    };
    Some(EnergyContext { order, sched: norm.schedule, params })
}

fn execute_solver_cell(
    cfg: &ExperimentConfig,
    prob: &BilevelProblem,
    cell: &PlannedRun,
    x0: &Array1<f64>,
) -> ManifestRun {
    let started = Instant::now();
    let mut notes: Vec<String> = cell.note.iter().cloned().collect();
    let wants_energy = cfg.diagnostics.lyapunov
        || cfg.diagnostics.dissipation
        || cfg.diagnostics.best_iterate;
    let energy = if wants_energy { energy_context(prob, &cell.solver, &mut notes) } else { None };

    let observe_energy = cfg.diagnostics.lyapunov;
    let outcome = run_with_observer(prob, &cell.solver, x0, |k, x, x_prev| {
        if !observe_energy || k == 0 {
            return None;
        }
        let ctx = energy.as_ref()?;
        match ctx.order {
            EnergyOrder::First => lyapunov_first(prob, &ctx.sched, &ctx.params, k, x).ok(),
            EnergyOrder::Second => {
                lyapunov_second(prob, &ctx.sched, &ctx.params, k, x, x_prev).ok()
            }
        }
    });

    let (trace, status) = match outcome {
        Ok(trace) => (Some(trace), RunStatus::Ok),
        Err(AlgorithmError::StepFailed { at, source, partial }) => (
            Some(*partial),
            RunStatus::Failed { error: format!("iteration {at} failed: {source}") },
        ),
        Err(other) => (None, RunStatus::Failed { error: other.to_string() }),
    };

    let mut entry = ManifestRun {
        id: cell.id.clone(),
        kind: RunKind::Solver,
        csv: format!("{}.csv", cell.id),
        status,
        wall_ms: 0,
        rows: 0,
        config: serde_json::to_value(&cell.solver).expect("solver config serializes"),
        sweep_value: cell.sweep_value,
        final_f_res: None,
        final_h_gap: None,
        final_dist: None,
        dissipation_k0: None,
        best_outer_gap: None,
        growth_worst_ratio: None,
        notes,
    };

    if let Some(trace) = &trace {
        let last = trace.final_record();
        entry.final_f_res = Some(last.f_res);
        entry.final_h_gap = Some(last.h_gap);
        entry.final_dist = last.dist;
        if entry.status.is_ok() {
            run_diagnostics(&cfg.diagnostics, prob, trace, energy.as_ref(), &mut entry);
        }
        let csv_path = cfg.output_dir.join(&entry.csv);
        match write_run_csv(&csv_path, trace, cfg.record_every) {
            Ok(rows) => entry.rows = rows,
            Err(e) => entry.status = RunStatus::Failed { error: e.to_string() },
        }
    }
    entry.wall_ms = started.elapsed().as_millis();
    entry
}

/// Post-run diagnostics; every unavailable check downgrades to a note.
fn run_diagnostics(
    flags: &DiagnosticsFlags,
    prob: &BilevelProblem,
    trace: &RunTrace,
    energy: Option<&EnergyContext>,
    entry: &mut ManifestRun,
) {
    if flags.dissipation {
        match energy {
            Some(ctx) => {
                let report = match ctx.order {
                    EnergyOrder::First => {
                        check_dissipation_first(prob, &ctx.sched, &ctx.params, trace)
                    }
                    EnergyOrder::Second => {
                        check_dissipation_second(prob, &ctx.sched, &ctx.params, trace)
                    }
                };
                match report {
                    Ok(r) => match r.k0 {
                        Some(k0) => entry.dissipation_k0 = Some(k0),
                        None => entry
                            .notes
                            .push("dissipation: no sustained-validity index found".into()),
                    },
                    Err(e) => entry.notes.push(format!("dissipation check skipped: {e}")),
                }
            }
            None => entry
                .notes
                .push("dissipation check skipped: no energy context".into()),
        }
    }
    if flags.best_iterate {
        match energy {
            Some(ctx) if trace.len() >= 3 => {
                let k = trace.len() - 2;
                match best_iterate(prob, trace, &ctx.sched, &ctx.params, ctx.order, 1, k) {
                    Ok(best) => {
                        entry.best_outer_gap = Some(prob.outer_gap(&best.x_best));
                        let which = match best.which {
                            BestChoice::LastIterate => "the last iterate",
                            BestChoice::Average => "the weighted average",
                        };
                        entry.notes.push(format!("best iterate chose {which}"));
                    }
                    Err(e) => entry.notes.push(format!("best iterate skipped: {e}")),
                }
            }
            Some(_) => entry
                .notes
                .push("best iterate skipped: the trace is too short".into()),
            None => entry.notes.push("best iterate skipped: no energy context".into()),
        }
    }
    if flags.holder_check {
        let samples: Vec<Array1<f64>> = sample_iterates(trace, 64);
        if samples.is_empty() {
            entry
                .notes
                .push("growth check skipped: no stored iterates".into());
        } else {
            match check_holder_growth(prob, &samples) {
                Ok(report) => {
                    entry.growth_worst_ratio = Some(report.worst_ratio);
                    if report.violations > 0 {
                        entry.notes.push(format!(
                            "growth check: {} of {} samples violate the assumption",
                            report.violations, report.samples_used
                        ));
                    }
                    if !report.bound_holds {
                        entry
                            .notes
                            .push("growth check: the outer-gap bound failed".into());
                    }
                }
                Err(e) => entry.notes.push(format!("growth check skipped: {e}")),
            }
        }
    }
}

/// Up to `cap` stored iterates, evenly spaced along the trace.
fn sample_iterates(trace: &RunTrace, cap: usize) -> Vec<Array1<f64>> {
    let stored: Vec<&Array1<f64>> =
        trace.records.iter().filter_map(|r| r.x.as_ref()).collect();
    if stored.is_empty() {
        return Vec::new();
    }
    let step = (stored.len() + cap - 1) / cap;
    stored.iter().step_by(step.max(1)).map(|x| (*x).clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{CompositeObjective, ProxTerm, SmoothTerm};
    use crate::harness::{parse_config, read_series_csv};

    fn toy_config(dir: &Path, extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"
output_dir = "{}"
[problem]
kind = "min_norm"
m = 3
d = 6
seed = 5
{extra}
"#,
            dir.display()
        );
        parse_config(&text, &[]).unwrap()
    }

    const ONE_BPG: &str = r#"
[[methods]]
method = "bpg"
max_iter = 10
schedule = { c = 1.0, delta = 0.9, beta = 1.0 }
"#;

    #[test]
    fn single_method_batch_writes_one_csv_and_a_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = toy_config(dir.path(), ONE_BPG);
        let summary = cmd_run(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(summary.failures(), 0);
        assert_eq!(summary.manifest.runs.len(), 1);
        let entry = &summary.manifest.runs[0];
        assert_eq!(entry.id, "bpg");
        assert_eq!(entry.rows, 11, "rows k = 0..=10");
        assert!(entry.final_f_res.unwrap() < 1.0);
        assert!(entry.final_dist.is_some(), "the toy ships a solution oracle");
        let series = read_series_csv(&dir.path().join("bpg.csv")).unwrap();
        assert_eq!(series.len(), 11);
        assert_eq!(series.index.first(), Some(&0.0));
        assert_eq!(series.index.last(), Some(&10.0));
        assert!(summary.manifest_path.exists());
    }

    #[test]
    fn finished_batches_are_not_clobbered_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = toy_config(dir.path(), ONE_BPG);
        cmd_run(&cfg, &RunOptions::default()).unwrap();
        let err = cmd_run(&cfg, &RunOptions::default()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("--force"), "{err}");
        cmd_run(&cfg, &RunOptions { force: true, jobs: 1 }).unwrap();
    }

    #[test]
    fn sweep_batches_write_one_csv_per_cell() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = toy_config(
            dir.path(),
            r#"
[[methods]]
method = "bfpg"
max_iter = 30
schedule = { c = 1.0, delta = 1.5, beta = 1.0 }
[[methods]]
method = "bpg"
max_iter = 30
schedule = { c = 1.0, delta = 1.5, beta = 1.0 }
[sweep]
parameter = "delta"
values = [1.2, 1.5, 1.8]
"#,
        );
        let summary = cmd_run(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(summary.manifest.runs.len(), 6);
        for entry in &summary.manifest.runs {
            assert!(entry.status.is_ok(), "{}: {:?}", entry.id, entry.status);
            assert!(cfg.output_dir.join(&entry.csv).exists(), "{}", entry.csv);
        }
        let ids: Vec<&str> =
            summary.manifest.runs.iter().map(|r| r.id.as_str()).collect();
        assert!(ids.contains(&"bfpg-delta1.2") && ids.contains(&"bpg-delta1.8"));
    }

    #[test]
    fn reruns_from_the_manifest_are_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let extra = r#"
[[methods]]
method = "bfpg"
max_iter = 60
schedule = { c = 1.0, delta = 1.5, beta = 1.0 }
[diagnostics]
lyapunov = true
"#;
        let cfg_a = toy_config(dir_a.path(), extra);
        let summary = cmd_run(&cfg_a, &RunOptions::default()).unwrap();
        let mut cfg_b = Manifest::load(&summary.manifest_path).unwrap().config;
        cfg_b.output_dir = dir_b.path().to_path_buf();
        cmd_run(&cfg_b, &RunOptions::default()).unwrap();
        let a = std::fs::read(dir_a.path().join("bfpg.csv")).unwrap();
        let b = std::fs::read(dir_b.path().join("bfpg.csv")).unwrap();
        assert!(!a.is_empty() && a == b, "traces must match byte for byte");
    }

    #[test]
    fn parallel_execution_matches_serial_output() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let extra = r#"
[[methods]]
method = "bfpg"
max_iter = 40
schedule = { c = 1.0, delta = 1.5, beta = 1.0 }
[[methods]]
method = "bpg"
max_iter = 40
schedule = { c = 1.0, delta = 1.5, beta = 1.0 }
[sweep]
parameter = "delta"
values = [1.2, 1.8]
"#;
        let serial = toy_config(dir_a.path(), extra);
        let parallel = toy_config(dir_b.path(), extra);
        cmd_run(&serial, &RunOptions::default()).unwrap();
        cmd_run(&parallel, &RunOptions { force: false, jobs: 3 }).unwrap();
        for name in ["bfpg-delta1.2.csv", "bfpg-delta1.8.csv", "bpg-delta1.2.csv"] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between serial and parallel runs");
        }
    }

    #[test]
    fn diagnostics_flags_fill_the_manifest_and_energy_column() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = toy_config(
            dir.path(),
            r#"
[[methods]]
method = "bfpg"
max_iter = 300
gamma = 3.0
schedule = { c = 1.0, delta = 1.5, beta = 3.0 }
[diagnostics]
lyapunov = true
dissipation = true
best_iterate = true
holder_check = true
"#,
        );
        let summary = cmd_run(&cfg, &RunOptions::default()).unwrap();
        let entry = &summary.manifest.runs[0];
        assert!(entry.status.is_ok(), "{:?}", entry.status);
        let k0 = entry.dissipation_k0.expect("dissipation index recorded");
        assert!(k0 <= 50, "k0 = {k0}");
        assert!(entry.best_outer_gap.is_some());
        assert!(entry.growth_worst_ratio.unwrap() >= 1.0 - 1e-9);
        let series = read_series_csv(&dir.path().join("bfpg.csv")).unwrap();
        assert!(series.e_lambda[0].is_none(), "the energy starts at k = 1");
        assert!(series.e_lambda[1..].iter().all(|e| e.is_some()));
        // the energy is not monotone (the outer-gap term changes sign along
        // the run), but it must collapse from its initial peak
        let energies: Vec<f64> = series.e_lambda[1..].iter().map(|e| e.unwrap()).collect();
        assert!(energies.iter().all(|e| e.is_finite()));
        let peak = energies[0];
        assert!(energies.iter().all(|e| *e <= peak + 1e-12), "peak at k = 1");
        assert!(
            energies.last().unwrap().abs() < 1e-4 * peak,
            "the energy collapses over the run"
        );
    }

    #[test]
    fn a_failing_cell_is_recorded_without_aborting_the_batch() {
        // an inner prox without a closed-form combination with the outer l1
        // term fails at the first iteration, after validation has passed
        let dim = 2;
        let inner = CompositeObjective::new(
            SmoothTerm::new(
                |x: &Array1<f64>| 0.5 * x.dot(x),
                |x: &Array1<f64>| x.clone(),
                1.0,
            ),
            ProxTerm::custom(|_| 0.0, |_, v| v.clone()),
        );
        let outer = CompositeObjective::new(SmoothTerm::zero(), ProxTerm::L1);
        let prob = BilevelProblem::new("custom-prox", dim, inner, outer).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let cfg = toy_config(
            dir.path(),
            r#"
[[methods]]
method = "bpg"
max_iter = 10
schedule = { c = 1.0, delta = 0.9, beta = 1.0 }
[[methods]]
method = "bfpg"
max_iter = 10
schedule = { c = 1.0, delta = 1.5, beta = 1.0 }
"#,
        );
        let summary = run_batch_on(&cfg, &prob, &RunOptions { force: false, jobs: 2 }).unwrap();
        assert_eq!(summary.failures(), 2, "both cells fail at their first prox call");
        for entry in &summary.manifest.runs {
            match &entry.status {
                RunStatus::Failed { error } => {
                    assert!(error.contains("failed"), "{error}")
                }
                RunStatus::Ok => panic!("{} should have failed", entry.id),
            }
            // the partial trace (the starting row) is still written
            assert!(cfg.output_dir.join(&entry.csv).exists());
            assert!(entry.rows >= 1);
        }
        assert!(summary.manifest_path.exists(), "the batch still writes its manifest");
    }

    #[test]
    fn cell_validation_failures_name_the_method() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = toy_config(
            dir.path(),
            r#"
[[methods]]
method = "bfpg"
max_iter = 10
alpha = 2.5
schedule = { c = 1.0, delta = 1.5, beta = 1.0 }
"#,
        );
        let err = cmd_run(&cfg, &RunOptions::default()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let msg = err.to_string();
        assert!(msg.contains("methods[0]") && msg.contains("alpha"), "{msg}");
        assert!(!manifest_path(dir.path()).exists(), "nothing ran");
    }
}
