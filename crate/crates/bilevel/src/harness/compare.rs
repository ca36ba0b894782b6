//! The `compare` command: merge finished traces for side-by-side study.
//!
//! Reads the traces a batch produced (running the batch first when the
//! output directory has no manifest yet) and writes two kinds of file:
//!
//! * `compare.csv`, a long-format merge with one `(method, k)` row per
//!   trace record, convenient for dataframe tooling;
//! * `panel_{F_res,H_gap,dist,step_norm}.csv`, one wide file per quantity
//!   with a column per run plus two rate guides `C k^{-delta/2}` and
//!   `C k^{-delta}`, where `delta` is the steepest schedule exponent in the
//!   batch (first-order runs count double, since they are driven with the
//!   halved exponent). Panel values are absolute values, so the columns sit
//!   on a log scale even when a gap crosses zero.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::algorithms::SolverConfig;

use super::run::{cmd_run, RunOptions, RunSummary};
use super::store::{manifest_path, read_series_csv, Manifest, RunKind, StoredSeries};
use super::{ExperimentConfig, HarnessError};

/// What the comparison produced.
#[derive(Debug)]
pub struct CompareOutput {
    /// Present when the batch was (re)run rather than reused.
    pub summary: Option<RunSummary>,
    pub compare_csv: PathBuf,
    pub panels: Vec<PathBuf>,
    pub manifest: Manifest,
}

/// Merge the batch under `cfg.output_dir`, running it first if needed.
pub fn cmd_compare(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<CompareOutput, HarnessError> {
    cfg.validate()?;
    let mpath = manifest_path(&cfg.output_dir);
    let summary = if !mpath.exists() || opts.force {
        Some(cmd_run(cfg, opts)?)
    } else {
        None
    };
    let manifest = Manifest::load(&mpath)?;
    let (compare_csv, panels) = merge_traces(&cfg.output_dir, &manifest)?;
    Ok(CompareOutput { summary, compare_csv, panels, manifest })
}

/// One finished solver run, loaded back from disk.
struct LoadedRun {
    id: String,
    series: StoredSeries,
    /// Guide exponent this run aims for: the schedule exponent for momentum
    /// methods, twice the (halved) exponent for first-order ones.
    guide_delta: Option<f64>,
}

fn load_finished_runs(
    dir: &Path,
    manifest: &Manifest,
) -> Result<Vec<LoadedRun>, HarnessError> {
    let wanted: Vec<_> = manifest
        .runs
        .iter()
        .filter(|r| r.kind == RunKind::Solver && r.status.is_ok())
        .collect();
    let missing: Vec<String> = wanted
        .iter()
        .filter(|r| !dir.join(&r.csv).exists())
        .map(|r| r.csv.clone())
        .collect();
    if !missing.is_empty() {
        return Err(HarnessError::Io(format!(
            "missing traces: {} (re-run the batch to regenerate them)",
            missing.join(", ")
        )));
    }
    if wanted.is_empty() {
        return Err(HarnessError::Validation(
            "the manifest holds no finished solver runs to compare".into(),
        ));
    }
    wanted
        .into_iter()
        .map(|r| {
            let series = read_series_csv(&dir.join(&r.csv))?;
            let guide_delta = serde_json::from_value::<SolverConfig>(r.config.clone())
                .ok()
                .filter(|c| !c.schedule.is_zero())
                .map(|c| {
                    if c.method.is_momentum() {
                        c.schedule.delta
                    } else {
                        2.0 * c.schedule.delta
                    }
                });
            Ok(LoadedRun { id: r.id.clone(), series, guide_delta })
        })
        .collect()
}

fn merge_traces(
    dir: &Path,
    manifest: &Manifest,
) -> Result<(PathBuf, Vec<PathBuf>), HarnessError> {
    let runs = load_finished_runs(dir, manifest)?;
    let compare_csv = write_long_merge(dir, &runs)?;
    let delta_ref = runs
        .iter()
        .filter_map(|r| r.guide_delta)
        .fold(f64::NAN, f64::max);
    let delta_ref = if delta_ref.is_finite() { delta_ref } else { 1.0 };
    let panels = FIELDS
        .iter()
        .map(|(name, pick)| write_panel(dir, &runs, name, *pick, delta_ref))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((compare_csv, panels))
}

fn write_long_merge(dir: &Path, runs: &[LoadedRun]) -> Result<PathBuf, HarnessError> {
    let mut out = String::from("method,k,F_res,H_gap,dist,step_norm\n");
    for run in runs {
        let s = &run.series;
        for i in 0..s.len() {
            let dist = s.dist[i].map(|d| d.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                run.id, s.index[i], s.f_res[i], s.h_gap[i], dist, s.motion[i]
            )
            .expect("writing to a string cannot fail");
        }
    }
    let path = dir.join("compare.csv");
    std::fs::write(&path, out)
        .map_err(|e| HarnessError::Io(format!("writing {}: {e}", path.display())))?;
    Ok(path)
}

type FieldPick = fn(&StoredSeries, usize) -> Option<f64>;

const FIELDS: [(&str, FieldPick); 4] = [
    ("F_res", |s, i| Some(s.f_res[i])),
    ("H_gap", |s, i| Some(s.h_gap[i])),
    ("dist", |s, i| s.dist[i]),
    ("step_norm", |s, i| Some(s.motion[i])),
];

/// Wide per-quantity panel: `k`, one absolute-value column per run, then the
/// two rate guides anchored at the first positive entry.
fn write_panel(
    dir: &Path,
    runs: &[LoadedRun],
    field: &str,
    pick: FieldPick,
    delta_ref: f64,
) -> Result<PathBuf, HarnessError> {
    // per-run map from integer iteration to |value|
    let tables: Vec<BTreeMap<i64, f64>> = runs
        .iter()
        .map(|run| {
            (0..run.series.len())
                .filter_map(|i| {
                    pick(&run.series, i)
                        .map(|v| (run.series.index[i].round() as i64, v.abs()))
                })
                .collect()
        })
        .collect();
    let ks: BTreeSet<i64> = tables.iter().flat_map(|t| t.keys().copied()).collect();

    // anchor the guides at the earliest positive value from k >= 1 on
    let anchor = ks
        .iter()
        .filter(|k| **k >= 1)
        .find_map(|k| {
            tables
                .iter()
                .find_map(|t| t.get(k).filter(|v| **v > 0.0))
                .map(|v| (*k as f64, *v))
        })
        .unwrap_or((1.0, 1.0));

    let mut out = String::from("k");
    for run in runs {
        write!(out, ",{}", run.id).expect("writing to a string cannot fail");
    }
    out.push_str(",rate_half,rate_full\n");
    for k in &ks {
        write!(out, "{k}").expect("writing to a string cannot fail");
        for t in &tables {
            match t.get(k) {
                Some(v) => write!(out, ",{v}"),
                None => write!(out, ","),
            }
            .expect("writing to a string cannot fail");
        }
        if *k >= 1 {
            let ratio = *k as f64 / anchor.0;
            writeln!(
                out,
                ",{},{}",
                anchor.1 * ratio.powf(-delta_ref / 2.0),
                anchor.1 * ratio.powf(-delta_ref)
            )
            .expect("writing to a string cannot fail");
        } else {
            out.push_str(",,\n");
        }
    }
    let path = dir.join(format!("panel_{field}.csv"));
    std::fs::write(&path, out)
        .map_err(|e| HarnessError::Io(format!("writing {}: {e}", path.display())))?;
    Ok(path)
}
