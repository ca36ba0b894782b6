//! Config-driven experiment runner behind the `bilevel` binary.
//!
//! An experiment is described by one declarative TOML file: a problem
//! instance, a list of solver configurations, an optional parameter sweep,
//! diagnostics switches, and an output directory. Four commands consume it:
//!
//! - [`cmd_run`]: execute every (method × sweep value) cell, write one CSV
//!   trace per cell plus a `manifest.json` capturing everything needed to
//!   reproduce the batch bit-identically;
//! - [`cmd_compare`]: merge the traces of a batch into a long-format CSV and
//!   per-panel plot files with `k^{−δ/2}` and `k^{−δ}` rate guide columns;
//! - [`cmd_flow`]: integrate the configured continuous-time flows, with the
//!   same batch/manifest conventions;
//! - [`cmd_report`]: summarize a finished batch (fitted slopes, dissipation
//!   indices, final distances) on stdout and in `report.json`.
//!
//! Values in config files can be overridden from the command line with
//! dotted paths (`--set problem.d=100`), sweeps default to the deterministic
//! grid written in the file (`--sample-seed` switches to random sampling),
//! and independent cells run concurrently up to a `--jobs` limit.

mod compare;
mod config;
mod flow;
mod report;
mod run;
mod store;

pub use compare::{cmd_compare, CompareOutput};
pub use config::{
    apply_overrides, load_config, parse_config, plan_flow_cells, plan_solver_cells,
    sample_sweep_values, DiagnosticsFlags, ExperimentConfig, FlowEntry, PlannedFlow, PlannedRun,
    ProblemSpec, StartPoint, SweepSpec, SyntheticData,
};
pub use report::{cmd_report, Report, ReportEntry};
pub use run::{cmd_run, RunOptions, RunSummary};
pub use store::{
    git_hash, read_series_csv, Manifest, ManifestRun, RunKind, RunStatus, StoredSeries,
    FLOW_CSV_HEADER, RUN_CSV_HEADER,
};

pub use flow::cmd_flow;

/// Errors from the experiment harness, grouped by exit-code category.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Malformed or inconsistent configuration (exit code 1).
    #[error("invalid configuration: {0}")]
    Validation(String),
    /// A failure while executing otherwise valid work (exit code 2).
    #[error("runtime failure: {0}")]
    Runtime(String),
    /// Missing, unreadable, or unwritable files (exit code 3).
    #[error("{0}")]
    Io(String),
}

impl HarnessError {
    /// Process exit code for this error: 1 validation, 2 runtime, 3 I/O
    /// (0 is reserved for success).
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 1,
            HarnessError::Runtime(_) => 2,
            HarnessError::Io(_) => 3,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<crate::algorithms::AlgorithmError> for HarnessError {
    fn from(e: crate::algorithms::AlgorithmError) -> Self {
        use crate::algorithms::AlgorithmError;
        match e {
            AlgorithmError::InvalidConfig(msg) => HarnessError::Validation(msg),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

impl From<crate::flows::FlowError> for HarnessError {
    fn from(e: crate::flows::FlowError) -> Self {
        use crate::flows::FlowError;
        match e {
            FlowError::NonSmoothProblem(_) | FlowError::InvalidConfig(_) => {
                HarnessError::Validation(e.to_string())
            }
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

impl From<crate::problems::ProblemError> for HarnessError {
    fn from(e: crate::problems::ProblemError) -> Self {
        use crate::problems::ProblemError;
        match e {
            ProblemError::Io(io) => HarnessError::Io(io.to_string()),
            other => HarnessError::Validation(other.to_string()),
        }
    }
}

impl From<crate::core::CoreError> for HarnessError {
    fn from(e: crate::core::CoreError) -> Self {
        HarnessError::Validation(e.to_string())
    }
}
