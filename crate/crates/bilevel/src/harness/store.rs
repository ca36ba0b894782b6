//! Trace CSVs and the batch manifest.
//!
//! Every solver cell writes one CSV with the fixed header
//! `k,F_res,H_gap,dist,eps,step_norm,E_lambda`; flow cells use `t` instead of
//! `k` and record the trajectory speed in place of the per-step distance.
//! Floats are written with the shortest decimal encoding that parses back to
//! the same bits, so a written trace is a lossless record; unavailable values
//! (no solution oracle, no energy observer) are empty fields.
//!
//! The manifest is one JSON document per output directory capturing the full
//! experiment config, the exact per-cell configurations after sweep
//! substitution, wall times, per-run diagnostics, and failure messages. A
//! batch re-run from a manifest's config reproduces every CSV byte for byte.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::diagnostics::RunTrace;
use crate::flows::FlowTrace;

use super::{ExperimentConfig, HarnessError};

/// Header of solver trace CSVs.
pub const RUN_CSV_HEADER: &str = "k,F_res,H_gap,dist,eps,step_norm,E_lambda";
/// Header of flow trace CSVs.
pub const FLOW_CSV_HEADER: &str = "t,F_res,H_gap,dist,eps,speed,E_lambda";

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

/// Write a solver trace. Every `record_every`-th row is written, plus the
/// final row regardless of alignment.
pub fn write_run_csv(
    path: &Path,
    trace: &RunTrace,
    record_every: usize,
) -> Result<usize, HarnessError> {
    let every = record_every.max(1);
    let last = trace.records.len().saturating_sub(1);
    let mut out = csv_writer(path)?;
    writeln!(out, "{RUN_CSV_HEADER}").map_err(|e| write_err(path, e))?;
    let mut rows = 0usize;
    for r in &trace.records {
        if r.k % every != 0 && r.k != last {
            continue;
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            r.f_res,
            r.h_gap,
            fmt_opt(r.dist),
            r.eps,
            r.step_norm,
            fmt_opt(r.e_lambda)
        )
        .map_err(|e| write_err(path, e))?;
        rows += 1;
    }
    out.flush().map_err(|e| write_err(path, e))?;
    Ok(rows)
}

/// Write a flow trace; `energy` (when given) must be aligned with the trace
/// records. Flow records are already thinned to a logarithmic grid, so
/// `record_every` usually stays 1.
pub fn write_flow_csv(
    path: &Path,
    trace: &FlowTrace,
    energy: Option<&[f64]>,
    record_every: usize,
) -> Result<usize, HarnessError> {
    if let Some(e) = energy {
        if e.len() != trace.records.len() {
            return Err(HarnessError::Runtime(format!(
                "energy series has {} entries for {} flow records",
                e.len(),
                trace.records.len()
            )));
        }
    }
    let every = record_every.max(1);
    let last = trace.records.len().saturating_sub(1);
    let mut out = csv_writer(path)?;
    writeln!(out, "{FLOW_CSV_HEADER}").map_err(|e| write_err(path, e))?;
    let mut rows = 0usize;
    for (i, r) in trace.records.iter().enumerate() {
        if i % every != 0 && i != last {
            continue;
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            r.f_res,
            r.h_gap,
            fmt_opt(r.dist),
            r.eps,
            r.speed,
            fmt_opt(energy.map(|e| e[i]))
        )
        .map_err(|e| write_err(path, e))?;
        rows += 1;
    }
    out.flush().map_err(|e| write_err(path, e))?;
    Ok(rows)
}

fn csv_writer(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, HarnessError> {
    let file = std::fs::File::create(path).map_err(|e| write_err(path, e))?;
    Ok(std::io::BufWriter::new(file))
}

fn write_err(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io(format!("writing {}: {e}", path.display()))
}

/// A trace CSV read back into columns. Solver and flow traces share the
/// shape; `index_name` records which kind it was (`k` or `t`).
#[derive(Debug, Clone)]
pub struct StoredSeries {
    pub index_name: String,
    /// Iteration indices or times, as stored.
    pub index: Vec<f64>,
    pub f_res: Vec<f64>,
    pub h_gap: Vec<f64>,
    pub dist: Vec<Option<f64>>,
    pub eps: Vec<f64>,
    /// Per-step distance (`step_norm`) for solver traces, trajectory speed
    /// for flow traces.
    pub motion: Vec<f64>,
    pub e_lambda: Vec<Option<f64>>,
}

impl StoredSeries {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn is_flow(&self) -> bool {
        self.index_name == "t"
    }

    /// `(index, value)` pairs with strictly positive values and index >= lo,
    /// the shape rate fits consume.
    pub fn positive_pairs(&self, values: &[f64], lo: f64) -> Vec<(f64, f64)> {
        self.index
            .iter()
            .zip(values)
            .filter(|(i, v)| **i >= lo && **v > 0.0)
            .map(|(i, v)| (*i, *v))
            .collect()
    }
}

/// Read a trace CSV written by this module. Any structural defect (wrong
/// header, wrong field count, unparseable number) is reported with the file
/// name and 1-based line number.
pub fn read_series_csv(path: &Path) -> Result<StoredSeries, HarnessError> {
    let file = std::fs::File::open(path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(line))) => line,
        Some((_, Err(e))) => {
            return Err(HarnessError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            return Err(HarnessError::Io(format!("{}: empty file", path.display())))
        }
    };
    let index_name = if header == RUN_CSV_HEADER {
        "k"
    } else if header == FLOW_CSV_HEADER {
        "t"
    } else {
        return Err(HarnessError::Io(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    };
    let mut series = StoredSeries {
        index_name: index_name.to_string(),
        index: Vec::new(),
        f_res: Vec::new(),
        h_gap: Vec::new(),
        dist: Vec::new(),
        eps: Vec::new(),
        motion: Vec::new(),
        e_lambda: Vec::new(),
    };
    for (lineno, line) in lines {
        let line = line.map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(HarnessError::Io(format!(
                "{} line {}: expected 7 fields, got {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let req = |s: &str, name: &str| -> Result<f64, HarnessError> {
            s.parse().map_err(|_| {
                HarnessError::Io(format!(
                    "{} line {}: bad {name} value {s:?}",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        let opt = |s: &str, name: &str| -> Result<Option<f64>, HarnessError> {
            if s.is_empty() { Ok(None) } else { req(s, name).map(Some) }
        };
        series.index.push(req(fields[0], index_name)?);
        series.f_res.push(req(fields[1], "F_res")?);
        series.h_gap.push(req(fields[2], "H_gap")?);
        series.dist.push(opt(fields[3], "dist")?);
        series.eps.push(req(fields[4], "eps")?);
        series.motion.push(req(fields[5], "step_norm/speed")?);
        series.e_lambda.push(opt(fields[6], "E_lambda")?);
    }
    Ok(series)
}

/// What kind of work a manifest entry records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Solver,
    Flow,
}

/// Terminal state of one cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed { error: String },
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }
}

/// One executed cell: its exact configuration, trace location, and the
/// diagnostics gathered while it ran.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRun {
    pub id: String,
    pub kind: RunKind,
    /// Trace file name, relative to the manifest's directory.
    pub csv: String,
    pub status: RunStatus,
    pub wall_ms: u128,
    /// CSV data rows written.
    pub rows: usize,
    /// Exact cell configuration after sweep substitution and adjustments.
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sweep_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_f_res: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_h_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_dist: Option<f64>,
    /// First index from which the dissipation inequality holds on.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dissipation_k0: Option<usize>,
    /// Outer gap of the best-iterate candidate.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub best_outer_gap: Option<f64>,
    /// Smallest observed growth ratio (>= 1 certifies the assumption).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub growth_worst_ratio: Option<f64>,
    /// Adjustments and skipped diagnostics, in the order they happened.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

/// The batch record written once per output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub created_unix_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub git_hash: Option<String>,
    /// The full experiment configuration, overrides already applied.
    pub config: ExperimentConfig,
    pub runs: Vec<ManifestRun>,
}

/// Location of the manifest inside an output directory.
pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

impl Manifest {
    pub fn new(config: ExperimentConfig, runs: Vec<ManifestRun>) -> Self {
        let created_unix_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        Self { created_unix_ms, git_hash: git_hash(), config, runs }
    }

    /// Write `manifest.json` into the directory.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, HarnessError> {
        let path = manifest_path(dir);
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| HarnessError::Runtime(format!("manifest serialization: {e}")))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| write_err(&path, e))?;
        Ok(path)
    }

    /// Read a manifest written by [`Manifest::save`].
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
    }

    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| !r.status.is_ok()).count()
    }
}

/// Current commit hash, when running inside a git checkout.
pub fn git_hash() -> Option<String> {
    let out = Command::new("git").args(["rev-parse", "HEAD"]).output().ok()?;
    if !out.status.success() {
        return None;
    }
    let hash = String::from_utf8(out.stdout).ok()?;
    let hash = hash.trim();
    if hash.is_empty() {
        None
    } else {
        Some(hash.to_string())
    }
}
