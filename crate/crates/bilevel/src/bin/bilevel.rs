//! Command-line front end for the experiment harness.
//!
//! Four verbs, all driven by a TOML experiment config (or a `manifest.json`
//! from an earlier batch, to reproduce it):
//!
//! ```text
//! bilevel run     --config exp.toml [--set path=value ...] [--jobs N] [--force]
//! bilevel compare --config exp.toml ...     # merge traces + rate-guide panels
//! bilevel flow    --config exp.toml ...     # continuous-time trajectories
//! bilevel report  <dir> | --config exp.toml # condense a finished batch
//! ```
//!
//! Exit codes: 0 success, 1 configuration rejected, 2 runtime failure,
//! 3 I/O problem.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use bilevel::harness::{
    cmd_compare, cmd_flow, cmd_report, cmd_run, load_config, parse_config,
    sample_sweep_values, ExperimentConfig, HarnessError, Manifest, RunOptions, RunSummary,
};

#[derive(Parser)]
#[command(
    name = "bilevel",
    about = "Batch runner for vanishing-regularization bilevel solvers",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every configured solver cell and write traces plus a manifest.
    Run(BatchArgs),
    /// Run (if needed), then merge traces into compare.csv and rate panels.
    Compare(BatchArgs),
    /// Integrate the configured continuous-time flows in batch.
    Flow(BatchArgs),
    /// Condense a finished batch into slope estimates and report.json.
    Report(ReportArgs),
}

#[derive(Args)]
struct BatchArgs {
    /// Experiment config (TOML), or a manifest.json to reproduce.
    #[arg(long)]
    config: PathBuf,
    /// Dotted-path config override, e.g. --set methods.0.max_iter=500
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
    /// How many cells to run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overwrite an output directory that already holds a manifest.
    #[arg(long)]
    force: bool,
    /// Replace the sweep grid with values sampled from this seed.
    #[arg(long, value_name = "SEED")]
    sample_seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding the batch (its manifest.json and traces).
    dir: Option<PathBuf>,
    /// Take the directory from this experiment config instead.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path config override (only with --config).
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
}

/// Print without panicking when stdout is a closed pipe (e.g. under `head`).
fn out(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    });
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.cmd {
        Cmd::Run(args) => {
            let (cfg, opts) = prepare(&args)?;
            let summary = cmd_run(&cfg, &opts)?;
            print_summary(&summary);
            fail_on_bad_runs(&summary)
        }
        Cmd::Compare(args) => {
            let (cfg, opts) = prepare(&args)?;
            let merged = cmd_compare(&cfg, &opts)?;
            if let Some(summary) = &merged.summary {
                print_summary(summary);
            }
            out(&format!("wrote {}\n", merged.compare_csv.display()));
            for panel in &merged.panels {
                out(&format!("wrote {}\n", panel.display()));
            }
            match &merged.summary {
                Some(s) => fail_on_bad_runs(s),
                None => Ok(()),
            }
        }
        Cmd::Flow(args) => {
            let (cfg, opts) = prepare(&args)?;
            let summary = cmd_flow(&cfg, &opts)?;
            print_summary(&summary);
            fail_on_bad_runs(&summary)
        }
        Cmd::Report(args) => {
            let dir = report_dir(&args)?;
            let (report, path) = cmd_report(&dir)?;
            out(&report.table());
            out(&format!("wrote {}\n", path.display()));
            Ok(())
        }
    }
}

fn prepare(args: &BatchArgs) -> Result<(ExperimentConfig, RunOptions), HarnessError> {
    let mut cfg = load_experiment(&args.config, &args.set)?;
    if let Some(seed) = args.sample_seed {
        let sweep = cfg.sweep.as_mut().ok_or_else(|| {
            HarnessError::Validation(
                "--sample-seed needs a [sweep] section to resample".into(),
            )
        })?;
        sweep.values = sample_sweep_values(sweep.values.len(), seed);
        out(&format!("sampled sweep values (seed {seed}): {:?}\n", sweep.values));
    }
    let opts = RunOptions { force: args.force, jobs: args.jobs };
    Ok((cfg, opts))
}

/// A `.json` config is a manifest from an earlier batch; anything else is a
/// TOML experiment file. Either way the dotted-path overrides apply on top.
fn load_experiment(path: &Path, set: &[String]) -> Result<ExperimentConfig, HarnessError> {
    if path.extension().is_some_and(|e| e == "json") {
        let manifest = Manifest::load(path)?;
        let text = toml::to_string(&manifest.config).map_err(|e| {
            HarnessError::Runtime(format!("re-encoding the manifest config: {e}"))
        })?;
        parse_config(&text, set)
    } else {
        load_config(path, set)
    }
}

fn report_dir(args: &ReportArgs) -> Result<PathBuf, HarnessError> {
    match (&args.dir, &args.config) {
        (Some(dir), None) => Ok(dir.clone()),
        (None, Some(config)) => Ok(load_experiment(config, &args.set)?.output_dir),
        (Some(_), Some(_)) => Err(HarnessError::Validation(
            "pass either a directory or --config, not both".into(),
        )),
        (None, None) => Err(HarnessError::Validation(
            "pass the batch directory (or --config to take it from a config file)".into(),
        )),
    }
}

fn print_summary(summary: &RunSummary) {
    for run in &summary.manifest.runs {
        let status = if run.status.is_ok() {
            format!("ok ({} rows, {} ms)", run.rows, run.wall_ms)
        } else {
            "FAILED".into()
        };
        out(&format!("run {}: {status}\n", run.id));
        for note in &run.notes {
            out(&format!("  note: {note}\n"));
        }
    }
    out(&format!("manifest: {}\n", summary.manifest_path.display()));
}

fn fail_on_bad_runs(summary: &RunSummary) -> Result<(), HarnessError> {
    let failed: Vec<&str> = summary
        .manifest
        .runs
        .iter()
        .filter(|r| !r.status.is_ok())
        .map(|r| r.id.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Runtime(format!(
            "{} of {} runs failed: {}",
            failed.len(),
            summary.manifest.runs.len(),
            failed.join(", ")
        )))
    }
}
