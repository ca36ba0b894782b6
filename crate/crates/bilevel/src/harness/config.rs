//! Declarative experiment configuration.
//!
//! One TOML document describes a whole batch: the problem instance, the
//! solver configurations, an optional `delta` sweep, diagnostics switches,
//! and the output directory. Command-line overrides address any field by its
//! dotted path (`--set methods.0.schedule.delta=1.4`), so a config file plus
//! its overrides is a complete, reproducible record of what ran.

use std::path::{Path, PathBuf};

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::SolverConfig;
use crate::core::{BilevelProblem, Schedule};
use crate::flows::{FlowConfig, FlowOrder};
use crate::problems::{
    bundled_train_path, load_dataset_csv, make_logistic_lifted, make_min_norm_toy,
    make_nemirovsky, make_synthetic_dataset, with_reference_oracle, LogisticLiftSpec,
    NemirovskySpec,
};

use super::HarnessError;

fn default_record_every() -> usize {
    1
}
fn default_anchor() -> f64 {
    50.0
}
fn default_lift_samples() -> usize {
    455
}
fn default_true() -> bool {
    true
}
fn default_max_dimension() -> usize {
    20_000
}
fn default_synthetic_rows() -> usize {
    455
}
fn default_synthetic_features() -> usize {
    30
}
fn default_flow_alpha() -> f64 {
    4.0
}
fn default_flow_t0() -> f64 {
    1.0
}

/// Top-level experiment description, usually parsed from a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    /// Solver runs for the `run` and `compare` commands.
    #[serde(default)]
    pub methods: Vec<SolverConfig>,
    /// Flow integrations for the `flow` command.
    #[serde(default)]
    pub flows: Vec<FlowEntry>,
    /// Optional parameter sweep multiplying out the method list.
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub diagnostics: DiagnosticsFlags,
    /// Directory receiving trace CSVs, the manifest, and reports.
    pub output_dir: PathBuf,
    /// Write every n-th trace row (the final row is always written).
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Starting point shared by all solver runs and, unless a flow entry
    /// overrides it, by the flows.
    #[serde(default)]
    pub x0: StartPoint,
}

/// The shipped problem families, tagged by `kind`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Chain-quadratic inner objective with an l1 pull toward an anchor.
    Nemirovsky {
        d: usize,
        j: usize,
        #[serde(default = "default_anchor")]
        anchor: f64,
    },
    /// l1-regularized selection among lifted logistic regression models.
    /// The dataset comes from `csv_path` (default: the bundled snapshot,
    /// relocatable via `BILEVEL_DATA_DIR`) or from `synthetic` data; the two
    /// sources are mutually exclusive.
    Logistic {
        #[serde(default)]
        csv_path: Option<PathBuf>,
        #[serde(default)]
        synthetic: Option<SyntheticData>,
        /// Maximal total degree of the polynomial feature lift.
        degree: usize,
        /// Training rows taken from the front of the dataset.
        #[serde(default = "default_lift_samples")]
        n_samples: usize,
        #[serde(default = "default_true")]
        standardize: bool,
        #[serde(default = "default_max_dimension")]
        max_dimension: usize,
        /// Iterations of the accelerated reference run that produces the
        /// inner-minimum estimate; defaults to ten times the longest
        /// configured run (at least 2000).
        #[serde(default)]
        reference_iters: Option<usize>,
    },
    /// Least-squares inner problem with minimum-norm outer selection.
    MinNorm { m: usize, d: usize, seed: u64 },
}

/// Shape and seed of a generated classification dataset.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    #[serde(default = "default_synthetic_rows")]
    pub n: usize,
    #[serde(default = "default_synthetic_features")]
    pub p: usize,
    pub seed: u64,
}

/// A parameter sweep multiplying out the method (or flow) list. Only the
/// schedule exponent can be swept: `parameter` must be `"delta"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Vec<f64>,
}

/// Post-run diagnostics computed per cell and recorded in the manifest.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsFlags {
    /// Record the Lyapunov energy column along each run.
    pub lyapunov: bool,
    /// Check the energy dissipation inequality and record the first
    /// sustained-validity index.
    pub dissipation: bool,
    /// Form the weighted-average/last-iterate candidate and record its
    /// outer value.
    pub best_iterate: bool,
    /// Audit the growth assumption at stored iterates.
    pub holder_check: bool,
}

/// Starting point: `"zeros"`, `"ones"`, or an explicit coordinate list.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum StartPoint {
    Named(String),
    Values(Vec<f64>),
}

impl Default for StartPoint {
    fn default() -> Self {
        StartPoint::Named("zeros".into())
    }
}

impl StartPoint {
    /// Concrete vector of the given dimension.
    pub fn materialize(&self, dimension: usize) -> Result<Array1<f64>, HarnessError> {
        match self {
            StartPoint::Named(name) => match name.as_str() {
                "zeros" => Ok(Array1::zeros(dimension)),
                "ones" => Ok(Array1::ones(dimension)),
                other => Err(HarnessError::Validation(format!(
                    "x0: unknown named start {other:?} (expected \"zeros\" or \"ones\")"
                ))),
            },
            StartPoint::Values(v) => {
                if v.len() != dimension {
                    return Err(HarnessError::Validation(format!(
                        "x0: explicit start has {} coordinates, problem dimension is {}",
                        v.len(),
                        dimension
                    )));
                }
                Ok(Array1::from_vec(v.clone()))
            }
        }
    }
}

/// One continuous-time trajectory to integrate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowEntry {
    pub order: FlowOrder,
    /// Damping coefficient of the second-order system.
    #[serde(default = "default_flow_alpha")]
    pub alpha: f64,
    pub schedule: Schedule,
    #[serde(default = "default_flow_t0")]
    pub t0: f64,
    pub t_end: f64,
    /// Integrator step; defaults to the stability bound for the problem.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Starting point override for this trajectory.
    #[serde(default)]
    pub x0: Option<StartPoint>,
    /// Initial velocity of the second-order system (zero when omitted).
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
}

impl FlowEntry {
    /// Resolve this entry against a problem, an experiment-level default
    /// start, and an optional sweep value replacing the schedule exponent.
    pub fn to_flow_config(
        &self,
        prob: &BilevelProblem,
        default_start: &StartPoint,
        delta_override: Option<f64>,
    ) -> Result<FlowConfig, HarnessError> {
        let sched = match delta_override {
            None => self.schedule,
            Some(delta) => {
                if self.schedule.is_zero() {
                    return Err(HarnessError::Validation(
                        "flows: a delta sweep needs a nonzero schedule (c > 0)".into(),
                    ));
                }
                Schedule::new(self.schedule.c, delta, self.schedule.beta)?
            }
        };
        let x0 = self
            .x0
            .as_ref()
            .unwrap_or(default_start)
            .materialize(prob.dimension)?;
        let mut cfg = FlowConfig::new(self.order, sched, self.t0, self.t_end, 1.0, x0)
            .with_alpha(self.alpha);
        cfg.dt = self.dt.unwrap_or_else(|| cfg.max_dt(prob));
        if let Some(v0) = &self.v0 {
            cfg = cfg.with_v0(Array1::from_vec(v0.clone()));
        }
        Ok(cfg)
    }
}

impl ExperimentConfig {
    /// Structural checks that need no problem instance; field paths appear
    /// in every message.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Validation(msg));
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if m.max_iter == 0 {
                return bad(format!("methods[{i}].max_iter must be at least 1"));
            }
            check_schedule(&m.schedule, &format!("methods[{i}].schedule"))?;
        }
        for (i, f) in self.flows.iter().enumerate() {
            check_schedule(&f.schedule, &format!("flows[{i}].schedule"))?;
            if !(f.t0 > 0.0) {
                return bad(format!("flows[{i}].t0 must be positive, got {}", f.t0));
            }
            if !(f.t_end > f.t0) {
                return bad(format!(
                    "flows[{i}].t_end must exceed t0 = {}, got {}",
                    f.t0, f.t_end
                ));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.parameter != "delta" {
                return bad(format!(
                    "sweep.parameter: only \"delta\" sweeps are supported, got {:?}",
                    sweep.parameter
                ));
            }
            if sweep.values.is_empty() {
                return bad("sweep.values must not be empty".into());
            }
            for (j, v) in sweep.values.iter().enumerate() {
                if !v.is_finite() {
                    return bad(format!("sweep.values[{j}] must be finite, got {v}"));
                }
            }
        }
        Ok(())
    }

    /// Largest configured iteration count, used to size reference runs.
    pub fn max_iter_hint(&self) -> usize {
        self.methods.iter().map(|m| m.max_iter).max().unwrap_or(0)
    }

    /// Build the configured problem instance.
    pub fn build_problem(&self) -> Result<BilevelProblem, HarnessError> {
        self.problem.build(self.max_iter_hint())
    }
}

fn check_schedule(s: &Schedule, path: &str) -> Result<(), HarnessError> {
    let bad = |msg: String| Err(HarnessError::Validation(msg));
    if !s.c.is_finite() || s.c < 0.0 {
        return bad(format!("{path}.c must be finite and nonnegative, got {}", s.c));
    }
    if s.c > 0.0 {
        if !(s.delta > 0.0) || !s.delta.is_finite() {
            return bad(format!("{path}.delta must be positive, got {}", s.delta));
        }
        if !(s.beta > 0.0) || !s.beta.is_finite() {
            return bad(format!("{path}.beta must be positive, got {}", s.beta));
        }
    }
    Ok(())
}

impl ProblemSpec {
    /// Construct the problem. `max_iter_hint` sizes the logistic reference
    /// run when `reference_iters` is not set explicitly.
    pub fn build(&self, max_iter_hint: usize) -> Result<BilevelProblem, HarnessError> {
        match self {
            ProblemSpec::Nemirovsky { d, j, anchor } => Ok(make_nemirovsky(NemirovskySpec {
                d: *d,
                j: *j,
                anchor: *anchor,
            })?),
            ProblemSpec::MinNorm { m, d, seed } => Ok(make_min_norm_toy(*m, *d, *seed)?),
            ProblemSpec::Logistic {
                csv_path,
                synthetic,
                degree,
                n_samples,
                standardize,
                max_dimension,
                reference_iters,
            } => {
                let dataset = match (csv_path, synthetic) {
                    (Some(_), Some(_)) => {
                        return Err(HarnessError::Validation(
                            "problem: csv_path and synthetic are mutually exclusive".into(),
                        ))
                    }
                    (None, Some(s)) => make_synthetic_dataset(s.n, s.p, s.seed),
                    (path, None) => {
                        let path = path.clone().unwrap_or_else(bundled_train_path);
                        load_dataset_csv(&path).map_err(|e| match e {
                            crate::problems::ProblemError::Io(io) => HarnessError::Io(format!(
                                "dataset {}: {io}",
                                path.display()
                            )),
                            other => HarnessError::Validation(other.to_string()),
                        })?
                    }
                };
                let spec = LogisticLiftSpec {
                    raw_features: dataset.n_features(),
                    lift_degree: *degree,
                    n_samples: *n_samples,
                    standardize: *standardize,
                    max_dimension: *max_dimension,
                };
                let prob = make_logistic_lifted(&dataset, spec)?;
                let iters = reference_iters.unwrap_or((10 * max_iter_hint).max(2000));
                Ok(with_reference_oracle(prob, iters))
            }
        }
    }
}

/// One solver cell of a batch: the exact configuration that will run.
#[derive(Debug, Clone)]
pub struct PlannedRun {
    /// File-name stem, unique within the batch.
    pub id: String,
    /// Position in the config's method list this cell came from.
    pub method_index: usize,
    /// The sweep value this cell came from, if any.
    pub sweep_value: Option<f64>,
    /// Configuration after sweep substitution and protocol adjustments.
    pub solver: SolverConfig,
    /// Human-readable record of any adjustment made while planning.
    pub note: Option<String>,
}

/// One flow cell of a batch.
#[derive(Debug, Clone)]
pub struct PlannedFlow {
    pub id: String,
    pub sweep_value: Option<f64>,
    pub config: FlowConfig,
}

/// Expand methods × sweep values into concrete solver cells.
///
/// Sweep semantics: swept values are schedule exponents in the open interval
/// (1, 2); momentum methods receive the value itself, all other methods half
/// of it (their regimes live below 1). The two-stage comparator additionally
/// has its schedule scale clamped to its admissible cap
/// `min(1/L_∇h, 1)` so shared protocol configs stay runnable; the clamp is
/// recorded in the cell's note.
pub fn plan_solver_cells(
    cfg: &ExperimentConfig,
    prob: &BilevelProblem,
) -> Result<Vec<PlannedRun>, HarnessError> {
    if cfg.methods.is_empty() {
        return Err(HarnessError::Validation(
            "methods: at least one solver configuration is required".into(),
        ));
    }
    if let Some(sweep) = &cfg.sweep {
        for (j, v) in sweep.values.iter().enumerate() {
            if !(*v > 1.0 && *v < 2.0) {
                return Err(HarnessError::Validation(format!(
                    "sweep.values[{j}]: delta = {v} is outside the sweep protocol \
                     range (1, 2); momentum methods use delta, the others delta/2"
                )));
            }
        }
    }
    let bases = unique_base_ids(cfg);
    let sweep_values: Vec<Option<f64>> = match &cfg.sweep {
        None => vec![None],
        Some(s) => s.values.iter().copied().map(Some).collect(),
    };
    let mut plan = Vec::with_capacity(cfg.methods.len() * sweep_values.len());
    for (i, method_cfg) in cfg.methods.iter().enumerate() {
        for value in &sweep_values {
            let mut solver = method_cfg.clone();
            let mut note = None;
            if let Some(v) = value {
                if solver.schedule.is_zero() {
                    return Err(HarnessError::Validation(format!(
                        "methods[{i}]: a delta sweep needs a nonzero schedule (c > 0)"
                    )));
                }
                let effective = if solver.method.is_momentum() { *v } else { *v / 2.0 };
                solver.schedule =
                    Schedule::new(solver.schedule.c, effective, solver.schedule.beta)?;
            }
            if solver.method == crate::algorithms::Method::Bisg2 && !solver.schedule.is_zero() {
                let l_h = prob.outer.smooth.lipschitz;
                let cap = if l_h > 0.0 { (1.0 / l_h).min(1.0) } else { 1.0 };
                if solver.schedule.c > cap {
                    note = Some(format!(
                        "schedule scale clamped from {} to {cap} (two-stage method needs \
                         c <= min(1/L_∇h, 1))",
                        solver.schedule.c
                    ));
                    solver.schedule =
                        Schedule::new(cap, solver.schedule.delta, solver.schedule.beta)?;
                }
            }
            let id = match value {
                None => bases[i].clone(),
                Some(v) => format!("{}-delta{v}", bases[i]),
            };
            plan.push(PlannedRun {
                id,
                method_index: i,
                sweep_value: *value,
                solver,
                note,
            });
        }
    }
    Ok(plan)
}

/// Expand flow entries × sweep values into concrete flow cells. Flow sweeps
/// replace the schedule exponent directly (no halving) and admit any
/// positive value, so both the vanishing and the non-vanishing regimes are
/// reachable.
pub fn plan_flow_cells(
    cfg: &ExperimentConfig,
    prob: &BilevelProblem,
) -> Result<Vec<PlannedFlow>, HarnessError> {
    if cfg.flows.is_empty() {
        return Err(HarnessError::Validation(
            "flows: at least one flow entry is required".into(),
        ));
    }
    if let Some(sweep) = &cfg.sweep {
        for (j, v) in sweep.values.iter().enumerate() {
            if !(*v > 0.0) {
                return Err(HarnessError::Validation(format!(
                    "sweep.values[{j}]: delta = {v} must be positive for flow sweeps"
                )));
            }
        }
    }
    let sweep_values: Vec<Option<f64>> = match &cfg.sweep {
        None => vec![None],
        Some(s) => s.values.iter().copied().map(Some).collect(),
    };
    let mut plan = Vec::new();
    for (i, entry) in cfg.flows.iter().enumerate() {
        let order_key = match entry.order {
            FlowOrder::First => "first",
            FlowOrder::Second => "second",
        };
        let base = if cfg.flows.len() == 1 {
            format!("flow-{order_key}")
        } else {
            format!("flow{}-{order_key}", i + 1)
        };
        for value in &sweep_values {
            let config = entry.to_flow_config(prob, &cfg.x0, *value)?;
            let id = match value {
                None => base.clone(),
                Some(v) => format!("{base}-delta{v}"),
            };
            plan.push(PlannedFlow { id, sweep_value: *value, config });
        }
    }
    Ok(plan)
}

/// Method-key file stems, disambiguated when a method appears twice.
fn unique_base_ids(cfg: &ExperimentConfig) -> Vec<String> {
    let keys: Vec<&str> = cfg.methods.iter().map(|m| m.method.key()).collect();
    keys.iter()
        .enumerate()
        .map(|(i, k)| {
            if keys.iter().filter(|other| *other == k).count() > 1 {
                format!("{k}-m{}", i + 1)
            } else {
                (*k).to_string()
            }
        })
        .collect()
}

/// Parse a config document and apply dotted-path overrides.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig, HarnessError> {
    let mut value: toml::Value = text
        .parse()
        .map_err(|e| HarnessError::Validation(format!("config parse error: {e}")))?;
    apply_overrides(&mut value, overrides)?;
    let cfg: ExperimentConfig = value
        .try_into()
        .map_err(|e| HarnessError::Validation(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Read and parse a config file, applying dotted-path overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Io(format!("config {}: {e}", path.display())))?;
    parse_config(&text, overrides)
}

/// Apply `path=value` overrides to a parsed TOML tree. Path segments are
/// separated by dots; numeric segments index arrays. Values are parsed as
/// TOML (so `--set sweep.values=[1.2,1.5]` works) and fall back to plain
/// strings. Missing intermediate tables are created; a missing array index
/// is an error except one past the end, which appends.
pub fn apply_overrides(root: &mut toml::Value, overrides: &[String]) -> Result<(), HarnessError> {
    for entry in overrides {
        let (path, raw) = entry.split_once('=').ok_or_else(|| {
            HarnessError::Validation(format!(
                "override {entry:?} must have the form path=value"
            ))
        })?;
        if path.is_empty() {
            return Err(HarnessError::Validation(format!(
                "override {entry:?} has an empty path"
            )));
        }
        let value = parse_override_value(raw);
        set_path(root, path, value)?;
    }
    Ok(())
}

fn parse_override_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut table) => table.remove("v").expect("parsed table holds the value"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), HarnessError> {
    let segments: Vec<&str> = path.split('.').collect();
    let mut cur = root;
    for (pos, seg) in segments.iter().enumerate() {
        let last = pos == segments.len() - 1;
        match cur {
            toml::Value::Table(table) => {
                if last {
                    table.insert((*seg).to_string(), value);
                    return Ok(());
                }
                cur = table
                    .entry((*seg).to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            }
            toml::Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| {
                    HarnessError::Validation(format!(
                        "override path {path:?}: segment {seg:?} must be an array index"
                    ))
                })?;
                if last {
                    if idx < items.len() {
                        items[idx] = value;
                    } else if idx == items.len() {
                        items.push(value);
                    } else {
                        return Err(HarnessError::Validation(format!(
                            "override path {path:?}: index {idx} is out of bounds \
                             (array has {} entries)",
                            items.len()
                        )));
                    }
                    return Ok(());
                }
                cur = items.get_mut(idx).ok_or_else(|| {
                    HarnessError::Validation(format!(
                        "override path {path:?}: index {idx} is out of bounds"
                    ))
                })?;
            }
            other => {
                return Err(HarnessError::Validation(format!(
                    "override path {path:?}: cannot descend into {} at {seg:?}",
                    other.type_str()
                )))
            }
        }
    }
    unreachable!("loop returns at the last segment")
}

/// Random sweep grid: `count` values drawn uniformly from the open interval
/// (1, 2), sorted ascending. Deterministic in `seed`; replaces the config's
/// hand-written values when the user opts into sampling.
pub fn sample_sweep_values(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<f64> = (0..count)
        .map(|_| loop {
            let v: f64 = rng.gen_range(1.0..2.0);
            if v > 1.0 {
                break v;
            }
        })
        .collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("sampled values are finite"));
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::Method;

    const MIN_NORM_TOML: &str = r#"
output_dir = "out"

[problem]
kind = "min_norm"
m = 3
d = 6
seed = 5

[[methods]]
method = "bfpg"
max_iter = 200
gamma = 20.0
schedule = { c = 10.0, delta = 1.5, beta = 10.0 }

[[methods]]
method = "bpg"
max_iter = 200
schedule = { c = 10.0, delta = 0.75, beta = 10.0 }
"#;

    #[test]
    fn toml_round_trip_covers_the_fields() {
        let cfg = parse_config(MIN_NORM_TOML, &[]).unwrap();
        assert_eq!(cfg.methods.len(), 2);
        assert_eq!(cfg.methods[0].method, Method::Bfpg);
        assert_eq!(cfg.methods[0].gamma, 20.0);
        assert_eq!(cfg.record_every, 1);
        assert_eq!(cfg.x0, StartPoint::Named("zeros".into()));
        assert!(cfg.sweep.is_none());
        // the parsed config serializes back to TOML (manifest embedding)
        let text = toml::to_string(&cfg).unwrap();
        let again = parse_config(&text, &[]).unwrap();
        assert_eq!(again.methods[1].schedule.delta, 0.75);
    }

    #[test]
    fn overrides_reach_nested_fields_arrays_and_new_tables() {
        let overrides = vec![
            "problem.d=12".to_string(),
            "methods.0.schedule.delta=1.4".to_string(),
            "sweep.parameter=delta".to_string(),
            "sweep.values=[1.2, 1.5]".to_string(),
            "output_dir=elsewhere".to_string(),
            "x0=ones".to_string(),
        ];
        let cfg = parse_config(MIN_NORM_TOML, &overrides).unwrap();
        match cfg.problem {
            ProblemSpec::MinNorm { d, .. } => assert_eq!(d, 12),
            other => panic!("unexpected problem {other:?}"),
        }
        assert_eq!(cfg.methods[0].schedule.delta, 1.4);
        let sweep = cfg.sweep.unwrap();
        assert_eq!(sweep.parameter, "delta");
        assert_eq!(sweep.values, vec![1.2, 1.5]);
        assert_eq!(cfg.output_dir, PathBuf::from("elsewhere"));
        assert_eq!(cfg.x0, StartPoint::Named("ones".into()));
    }

    #[test]
    fn bad_overrides_are_rejected_with_the_path() {
        let err = parse_config(MIN_NORM_TOML, &["methods.7.step=0.1".into()]).unwrap_err();
        assert!(err.to_string().contains("methods.7.step"), "{err}");
        let err = parse_config(MIN_NORM_TOML, &["no_equals_sign".into()]).unwrap_err();
        assert!(err.to_string().contains("path=value"), "{err}");
        let err =
            parse_config(MIN_NORM_TOML, &["problem.kind.x=1".into()]).unwrap_err();
        assert!(err.to_string().contains("cannot descend"), "{err}");
    }

    #[test]
    fn validation_names_the_offending_field() {
        let err = parse_config(
            MIN_NORM_TOML,
            &["methods.1.schedule.delta=-1".into()],
        )
        .unwrap_err();
        assert!(err.to_string().contains("methods[1].schedule.delta"), "{err}");
        let err = parse_config(MIN_NORM_TOML, &["record_every=0".into()]).unwrap_err();
        assert!(err.to_string().contains("record_every"), "{err}");
        let err = parse_config(
            MIN_NORM_TOML,
            &["sweep.parameter=alpha".into(), "sweep.values=[1.5]".into()],
        )
        .unwrap_err();
        assert!(err.to_string().contains("sweep.parameter"), "{err}");
    }

    #[test]
    fn sweep_expansion_halves_delta_for_non_momentum_methods() {
        let overrides = vec![
            "sweep.parameter=delta".to_string(),
            "sweep.values=[1.2, 1.8]".to_string(),
        ];
        let cfg = parse_config(MIN_NORM_TOML, &overrides).unwrap();
        let prob = cfg.build_problem().unwrap();
        let plan = plan_solver_cells(&cfg, &prob).unwrap();
        assert_eq!(plan.len(), 4);
        let ids: Vec<&str> = plan.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["bfpg-delta1.2", "bfpg-delta1.8", "bpg-delta1.2", "bpg-delta1.8"]);
        assert_eq!(plan[0].solver.schedule.delta, 1.2, "momentum methods keep delta");
        assert_eq!(plan[2].solver.schedule.delta, 0.6, "others take delta/2");
        assert_eq!(plan[2].sweep_value, Some(1.2), "the cell remembers the raw value");
    }

    #[test]
    fn out_of_range_sweep_values_name_the_constraint() {
        let overrides = vec![
            "sweep.parameter=delta".to_string(),
            "sweep.values=[1.5, 2.5]".to_string(),
        ];
        let cfg = parse_config(MIN_NORM_TOML, &overrides).unwrap();
        let prob = cfg.build_problem().unwrap();
        let err = plan_solver_cells(&cfg, &prob).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sweep.values[1]"), "{msg}");
        assert!(msg.contains("2.5") && msg.contains("(1, 2)"), "{msg}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn two_stage_scale_is_clamped_with_a_note() {
        let toml = r#"
output_dir = "out"
[problem]
kind = "min_norm"
m = 2
d = 4
seed = 1
[[methods]]
method = "bisg2"
max_iter = 50
schedule = { c = 100.0, delta = 0.95, beta = 1.0 }
"#;
        let cfg = parse_config(toml, &[]).unwrap();
        let prob = cfg.build_problem().unwrap();
        let plan = plan_solver_cells(&cfg, &prob).unwrap();
        // the toy's outer objective is 1/2 ||x||^2, so L_∇h = 1 and the cap is 1
        assert_eq!(plan[0].solver.schedule.c, 1.0);
        assert!(plan[0].note.as_ref().unwrap().contains("clamped"), "{:?}", plan[0].note);
        plan[0].solver.validate(&prob).expect("clamped config is admissible");
    }

    #[test]
    fn duplicate_methods_get_distinct_ids() {
        let overrides = vec!["methods.1.method=bfpg".to_string()];
        let cfg = parse_config(MIN_NORM_TOML, &overrides).unwrap();
        let prob = cfg.build_problem().unwrap();
        let plan = plan_solver_cells(&cfg, &prob).unwrap();
        assert_eq!(plan[0].id, "bfpg-m1");
        assert_eq!(plan[1].id, "bfpg-m2");
    }

    #[test]
    fn flow_cells_apply_sweeps_directly_and_default_dt() {
        let toml = r#"
output_dir = "out"
x0 = "ones"
[problem]
kind = "min_norm"
m = 3
d = 6
seed = 13
[sweep]
parameter = "delta"
values = [0.5, 0.9, 1.0, 1.5]
[[flows]]
order = "first"
schedule = { c = 1.0, delta = 1.0, beta = 1.0 }
t_end = 50.0
"#;
        let cfg = parse_config(toml, &[]).unwrap();
        let prob = cfg.build_problem().unwrap();
        let plan = plan_flow_cells(&cfg, &prob).unwrap();
        assert_eq!(plan.len(), 4, "one file per sweep value");
        assert_eq!(plan[0].id, "flow-first-delta0.5");
        assert_eq!(plan[0].config.sched.delta, 0.5, "no halving for flows");
        let cap = plan[0].config.max_dt(&prob);
        assert!((plan[0].config.dt - cap).abs() < 1e-15, "dt defaults to the bound");
        assert_eq!(plan[3].config.sched.delta, 1.5);
        // solver sweeps reject these values, flow sweeps accept them
        assert!(plan_solver_cells(&cfg, &prob).is_err());
    }

    #[test]
    fn logistic_sources_are_mutually_exclusive() {
        let toml = r#"
output_dir = "out"
[problem]
kind = "logistic"
degree = 1
csv_path = "somewhere.csv"
synthetic = { seed = 3 }
[[methods]]
method = "bpg"
max_iter = 10
schedule = { c = 1.0, delta = 0.9, beta = 1.0 }
"#;
        let cfg = parse_config(toml, &[]).unwrap();
        let err = cfg.build_problem().unwrap_err();
        assert!(err.to_string().contains("mutually exclusive"), "{err}");
    }

    #[test]
    fn synthetic_logistic_builds_with_a_reference_oracle() {
        let toml = r#"
output_dir = "out"
[problem]
kind = "logistic"
degree = 1
synthetic = { n = 60, p = 4, seed = 7 }
n_samples = 60
reference_iters = 300
[[methods]]
method = "bpg"
max_iter = 20
schedule = { c = 1.0, delta = 0.9, beta = 1.0 }
"#;
        let cfg = parse_config(toml, &[]).unwrap();
        let prob = cfg.build_problem().unwrap();
        assert_eq!(prob.dimension, 5, "degree-1 lift is the affine features");
        let oracle = prob.oracle.as_ref().expect("reference oracle attached");
        assert!(oracle.reference_only);
        assert!(oracle.min_inner.is_some());
    }

    #[test]
    fn sampled_sweep_values_are_deterministic_and_in_range() {
        let a = sample_sweep_values(20, 42);
        let b = sample_sweep_values(20, 42);
        assert_eq!(a, b);
        assert!(a.iter().all(|v| *v > 1.0 && *v < 2.0));
        assert!(a.windows(2).all(|w| w[0] <= w[1]), "sorted ascending");
        let c = sample_sweep_values(20, 43);
        assert_ne!(a, c, "different seeds change the grid");
    }

    #[test]
    fn start_points_materialize_or_explain() {
        assert_eq!(StartPoint::default().materialize(3).unwrap(), Array1::<f64>::zeros(3));
        assert_eq!(
            StartPoint::Named("ones".into()).materialize(2).unwrap(),
            Array1::<f64>::ones(2)
        );
        let err = StartPoint::Named("twos".into()).materialize(2).unwrap_err();
        assert!(err.to_string().contains("twos"), "{err}");
        let err = StartPoint::Values(vec![1.0]).materialize(2).unwrap_err();
        assert!(err.to_string().contains("dimension"), "{err}");
    }
}
