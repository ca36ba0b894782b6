//! Per-iteration records accumulated by a solver run.
//!
//! A trace stores one record per iteration index `k = 0..=max_iter` with the
//! scalar series used for plots and rate fits (inner residual, outer gap,
//! distance to the solution, schedule value, consecutive-iterate distance,
//! optional Lyapunov energy) plus the iterate vector itself, subject to the
//! storage policy. Scalars are always dense; iterate vectors are thinned on
//! large runs so memory stays bounded.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

/// Scalar series selectable from a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceField {
    /// `F(x_k) − min F` (raw `F(x_k)` when no oracle value is attached).
    FRes,
    /// `H(x_k) − min H over argmin F` (raw `H(x_k)` without an oracle).
    HGap,
    /// `|H gap|`, the quantity whose decay the outer rate statements bound.
    AbsHGap,
    /// `‖x_k − x*‖`.
    Dist,
    /// Schedule value `ε_k` under the method's own indexing convention.
    Eps,
    /// `‖x_k − x_{k−1}‖`, zero at `k = 0`.
    StepNorm,
    /// Lyapunov energy supplied by an observer, when one was attached.
    ELambda,
}

/// Iterate-vector retention policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoragePolicy {
    /// Every iterate kept.
    Full,
    /// Every `every`-th iterate kept (plus the final one).
    Thinned { every: usize },
}

/// Stored scalars beyond which iterate vectors are thinned.
const FULL_STORAGE_SCALAR_CAP: usize = 10_000_000;

impl StoragePolicy {
    /// Full storage while `dimension·rows` stays below 10⁷ scalars, every
    /// 10th iterate beyond that.
    pub fn for_size(dimension: usize, rows: usize) -> Self {
        if dimension.saturating_mul(rows) <= FULL_STORAGE_SCALAR_CAP {
            StoragePolicy::Full
        } else {
            StoragePolicy::Thinned { every: 10 }
        }
    }

    /// Whether the iterate at index `k` is kept (`last` is the final index,
    /// always kept).
    pub fn keeps(&self, k: usize, last: usize) -> bool {
        match self {
            StoragePolicy::Full => true,
            StoragePolicy::Thinned { every } => k % every == 0 || k == last,
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, StoragePolicy::Full)
    }
}

/// One iteration's worth of diagnostics.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub k: usize,
    /// The iterate, present according to the storage policy.
    pub x: Option<Array1<f64>>,
    pub f_res: f64,
    pub h_gap: f64,
    pub dist: Option<f64>,
    pub eps: f64,
    pub step_norm: f64,
    pub e_lambda: Option<f64>,
}

impl TraceRecord {
    /// Read one scalar series entry; `None` where the value is unavailable.
    pub fn get(&self, field: TraceField) -> Option<f64> {
        match field {
            TraceField::FRes => Some(self.f_res),
            TraceField::HGap => Some(self.h_gap),
            TraceField::AbsHGap => Some(self.h_gap.abs()),
            TraceField::Dist => self.dist,
            TraceField::Eps => Some(self.eps),
            TraceField::StepNorm => Some(self.step_norm),
            TraceField::ELambda => self.e_lambda,
        }
    }
}

/// Run-level metadata carried alongside the records.
#[derive(Debug, Clone)]
pub struct TraceMeta {
    pub problem_id: String,
    pub dimension: usize,
    /// Lowercase method key (`bpg`, `bfpg`, ...).
    pub method: String,
    /// Snapshot of the solver configuration that produced the trace.
    pub config: serde_json::Value,
    /// Step size actually used (initial step for adaptive methods).
    pub resolved_step: f64,
    pub storage: StoragePolicy,
    pub wall_ms: u128,
    /// The oracle's `min F` came from a reference run, not a closed form.
    pub min_inner_reference_only: bool,
}

/// A complete run: records at `k = 0..=max_iter` plus metadata.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record at iteration `k` (records are dense in `k`).
    pub fn record(&self, k: usize) -> Option<&TraceRecord> {
        let r = self.records.get(k)?;
        debug_assert_eq!(r.k, k);
        Some(r)
    }

    pub fn final_record(&self) -> &TraceRecord {
        self.records.last().expect("trace holds at least the initial point")
    }

    /// Iterate vector at `k`, if the storage policy kept it.
    pub fn iterate(&self, k: usize) -> Option<&Array1<f64>> {
        self.record(k)?.x.as_ref()
    }

    pub fn is_full_storage(&self) -> bool {
        self.meta.storage.is_full()
    }

    /// `(k, value)` pairs of one scalar series, skipping unavailable entries.
    pub fn series(&self, field: TraceField) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.get(field).map(|v| (r.k, v)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn storage_policy_thresholds() {
        assert_eq!(StoragePolicy::for_size(100, 10_001), StoragePolicy::Full);
        assert_eq!(
            StoragePolicy::for_size(5456, 20_001),
            StoragePolicy::Thinned { every: 10 }
        );
        let p = StoragePolicy::Thinned { every: 10 };
        assert!(p.keeps(0, 25));
        assert!(p.keeps(20, 25));
        assert!(!p.keeps(21, 25));
        assert!(p.keeps(25, 25), "final iterate is always kept");
    }

    #[test]
    fn field_access_covers_all_series() {
        let r = TraceRecord {
            k: 3,
            x: None,
            f_res: 2.0,
            h_gap: -0.5,
            dist: None,
            eps: 0.1,
            step_norm: 0.01,
            e_lambda: Some(7.0),
        };
        assert_eq!(r.get(TraceField::FRes), Some(2.0));
        assert_eq!(r.get(TraceField::HGap), Some(-0.5));
        assert_eq!(r.get(TraceField::AbsHGap), Some(0.5));
        assert_eq!(r.get(TraceField::Dist), None);
        assert_eq!(r.get(TraceField::Eps), Some(0.1));
        assert_eq!(r.get(TraceField::StepNorm), Some(0.01));
        assert_eq!(r.get(TraceField::ELambda), Some(7.0));
    }
}
