//! The `report` command: condense a finished batch into rate estimates.
//!
//! Reads every trace a manifest points at, fits the decay exponents over the
//! final decade of each series (where transients have died off), and writes
//! `report.json` next to the manifest. The binary prints the same numbers as
//! a fixed-width table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::diagnostics::fit_loglog;

use super::store::{manifest_path, read_series_csv, Manifest, RunKind, RunStatus};
use super::HarnessError;

/// Per-run condensate of a trace.
#[derive(Debug, Clone, Serialize)]
pub struct ReportEntry {
    pub id: String,
    pub kind: RunKind,
    pub status_ok: bool,
    pub rows: usize,
    /// Log-log slope of the inner residual over the final decade.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_r2: Option<f64>,
    /// Log-log slope of the absolute outer gap over the final decade.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_f_res: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_dist: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dissipation_k0: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

/// The whole batch, condensed.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub created_unix_ms: u128,
    pub entries: Vec<ReportEntry>,
}

impl Report {
    /// Fixed-width text rendering for terminals.
    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<24} {:>6} {:>9} {:>7} {:>9} {:>11} {:>11} {:>6}",
            "run", "rows", "F slope", "r2", "H slope", "final F", "final dist", "k0"
        )
        .expect("writing to a string cannot fail");
        for e in &self.entries {
            let fmt_opt = |v: Option<f64>, prec: usize| match v {
                Some(v) => format!("{v:.prec$}"),
                None => "-".into(),
            };
            let fmt_sci = |v: Option<f64>| match v {
                Some(v) => format!("{v:.3e}"),
                None => "-".into(),
            };
            writeln!(
                out,
                "{:<24} {:>6} {:>9} {:>7} {:>9} {:>11} {:>11} {:>6}",
                e.id,
                if e.status_ok { e.rows.to_string() } else { "failed".into() },
                fmt_opt(e.f_slope, 3),
                fmt_opt(e.f_r2, 3),
                fmt_opt(e.h_slope, 3),
                fmt_sci(e.final_f_res),
                fmt_sci(e.final_dist),
                e.dissipation_k0.map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
            )
            .expect("writing to a string cannot fail");
            for note in &e.notes {
                writeln!(out, "    note: {note}").expect("writing to a string cannot fail");
            }
        }
        out
    }
}

/// Condense the batch under `dir` and write `report.json` beside its traces.
pub fn cmd_report(dir: &Path) -> Result<(Report, PathBuf), HarnessError> {
    let manifest = Manifest::load(&manifest_path(dir))?;
    let mut entries = Vec::with_capacity(manifest.runs.len());
    for run in &manifest.runs {
        let mut entry = ReportEntry {
            id: run.id.clone(),
            kind: run.kind,
            status_ok: run.status.is_ok(),
            rows: run.rows,
            f_slope: None,
            f_r2: None,
            h_slope: None,
            final_f_res: run.final_f_res,
            final_dist: run.final_dist,
            dissipation_k0: run.dissipation_k0,
            notes: run.notes.clone(),
        };
        if let RunStatus::Failed { error } = &run.status {
            entry.notes.push(format!("run failed: {error}"));
            entries.push(entry);
            continue;
        }
        let series = read_series_csv(&dir.join(&run.csv))?;
        let last = series.index.last().copied().unwrap_or(0.0);
        let lo = (last / 10.0).max(1.0);
        let f_pairs = series.positive_pairs(&series.f_res, lo);
        if f_pairs.len() >= 2 {
            let fit = fit_loglog(&f_pairs);
            entry.f_slope = Some(fit.slope);
            entry.f_r2 = Some(fit.r2);
        } else {
            entry.notes.push(
                "no residual slope: fewer than two positive points in the final decade"
                    .into(),
            );
        }
        let h_abs: Vec<f64> = series.h_gap.iter().map(|v| v.abs()).collect();
        let h_pairs = series.positive_pairs(&h_abs, lo);
        if h_pairs.len() >= 2 {
            entry.h_slope = Some(fit_loglog(&h_pairs).slope);
        }
        if entry.final_dist.is_none() {
            entry.final_dist = series.dist.iter().rev().find_map(|d| *d);
        }
        entries.push(entry);
    }
    let report = Report {
        created_unix_ms: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .expect("the clock is past 1970")
            .as_millis(),
        entries,
    };
    let path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| HarnessError::Runtime(format!("encoding the report: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text)
        .map_err(|e| HarnessError::Io(format!("writing {}: {e}", path.display())))?;
    Ok((report, path))
}
