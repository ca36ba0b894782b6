//! The `flow` command: integrate continuous-time trajectories in batch.
//!
//! Mirrors the solver batch: each configured flow (times each sweep value)
//! becomes one cell with its own CSV, and the manifest ties the batch
//! together. Flow cells are validated up front, because a bad damping
//! constant or time grid is a configuration mistake, not a runtime accident.

use std::time::Instant;

use crate::core::BilevelProblem;
use crate::flows::{continuous_lyapunov, integrate_flow, FlowOrder};

use super::config::PlannedFlow;
use super::run::{prepare_output_dir, run_cells, RunOptions, RunSummary};
use super::store::{write_flow_csv, Manifest, ManifestRun, RunKind, RunStatus};
use super::{plan_flow_cells, ExperimentConfig, HarnessError};

/// Execute every configured flow cell and write traces plus the manifest.
pub fn cmd_flow(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    let prob = cfg.build_problem()?;
    run_flow_batch_on(cfg, &prob, opts)
}

/// [`cmd_flow`] against an already-built problem instance.
pub(crate) fn run_flow_batch_on(
    cfg: &ExperimentConfig,
    prob: &BilevelProblem,
    opts: &RunOptions,
) -> Result<RunSummary, HarnessError> {
    let plan = plan_flow_cells(cfg, prob)?;
    for cell in &plan {
        cell.config.validate(prob).map_err(|e| {
            HarnessError::Validation(format!("flow cell {}: {e}", cell.id))
        })?;
    }
    prepare_output_dir(&cfg.output_dir, opts.force)?;
    let runs = run_cells(plan.len(), opts.jobs, |i| {
        execute_flow_cell(cfg, prob, &plan[i])
    });
    let manifest = Manifest::new(cfg.clone(), runs);
    let manifest_path = manifest.save(&cfg.output_dir)?;
    Ok(RunSummary { manifest_path, manifest })
}

/// Default energy weight: the smallest-constant valid choice for first-order
/// trajectories, the midpoint of the admissible interval for second-order.
fn default_lambda(order: FlowOrder, alpha: f64) -> f64 {
    match order {
        FlowOrder::First => 2.0,
        FlowOrder::Second => 0.5 * (2.0 + alpha - 1.0),
    }
}

fn execute_flow_cell(
    cfg: &ExperimentConfig,
    prob: &BilevelProblem,
    cell: &PlannedFlow,
) -> ManifestRun {
    let started = Instant::now();
    let mut notes: Vec<String> = Vec::new();

    let mut entry = ManifestRun {
        id: cell.id.clone(),
        kind: RunKind::Flow,
        csv: format!("{}.csv", cell.id),
        status: RunStatus::Ok,
        wall_ms: 0,
        rows: 0,
        config: serde_json::to_value(&cell.config).expect("flow config serializes"),
        sweep_value: cell.sweep_value,
        final_f_res: None,
        final_h_gap: None,
        final_dist: None,
        dissipation_k0: None,
        best_outer_gap: None,
        growth_worst_ratio: None,
        notes: Vec::new(),
    };

    match integrate_flow(prob, &cell.config) {
        Ok(trace) => {
            let last = trace.final_record();
            entry.final_f_res = Some(last.f_res);
            entry.final_h_gap = Some(last.h_gap);
            entry.final_dist = last.dist;
            let energy = if cfg.diagnostics.lyapunov {
                let lambda = default_lambda(cell.config.order, cell.config.alpha);
                match continuous_lyapunov(prob, &cell.config, &trace, lambda) {
                    Ok(series) => Some(series.energy),
                    Err(e) => {
                        notes.push(format!("continuous energy skipped: {e}"));
                        None
                    }
                }
            } else {
                None
            };
            let csv_path = cfg.output_dir.join(&entry.csv);
            match write_flow_csv(&csv_path, &trace, energy.as_deref(), cfg.record_every) {
                Ok(rows) => entry.rows = rows,
                Err(e) => entry.status = RunStatus::Failed { error: e.to_string() },
            }
        }
        Err(e) => entry.status = RunStatus::Failed { error: e.to_string() },
    }
    entry.notes = notes;
    entry.wall_ms = started.elapsed().as_millis();
    entry
}
