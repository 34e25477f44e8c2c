//! Scenario-driven front end for `kahler-core`: parsing, dispatch, reports
//! and artifacts.

pub mod error;
pub mod report;
pub mod scenario;
pub mod tasks;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use kahler_core::flow::FlowKind;
use rayon::prelude::*;

pub use error::CliError;
pub use report::{CheckReport, ScenarioReport, Summary};
pub use scenario::{Scenario, Task};

/// Global options shared by every verb.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tolerance_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: None,
            out: None,
            tolerance_scale: 1.0,
        }
    }
}

/// Result of running one scenario file.
pub enum Outcome {
    Scenario(ScenarioReport),
    Suite(Summary),
}

impl Outcome {
    pub fn pass(&self) -> bool {
        match self {
            Outcome::Scenario(r) => r.pass,
            Outcome::Suite(s) => s.pass,
        }
    }
}

/// Runs an already parsed scenario; `base` resolves relative suite paths.
pub fn run(sc: &Scenario, base: &Path, opts: &RunOptions) -> Result<Outcome, CliError> {
    let mut sc = sc.clone();
    if let Some(seed) = opts.seed {
        sc.seed = seed;
    }
    if opts.tolerance_scale.is_nan() || opts.tolerance_scale <= 0.0 {
        return Err(CliError::config("--tolerance-scale must be positive"));
    }
    let tol = tasks::Tol(opts.tolerance_scale);
    let out = match &sc.task {
        Task::Curvature(t) => tasks::curvature(&sc, t, tol)?,
        Task::HscSup(t) => tasks::hsc_sup(&sc, t, tol)?,
        Task::Flow(t) => tasks::flow(&sc, t, FlowKind::Krf, tol)?,
        Task::NormalizedFlow(t) => tasks::flow(&sc, t, FlowKind::Normalized, tol)?,
        Task::Continuity(t) => tasks::continuity(&sc, t, tol)?,
        Task::Chern(t) => tasks::chern(&sc, t, tol)?,
        Task::MyAudit(t) => tasks::audit(&sc, t, tol)?,
        Task::MuBounds(t) => tasks::mu_bounds(&sc, t, tol)?,
        Task::Expansion(t) => tasks::expansion(&sc, t)?,
        Task::Suite { dir } => return Ok(Outcome::Suite(run_suite(&base.join(dir), opts)?)),
    };
    let mut report = ScenarioReport {
        scenario: sc.name.clone(),
        task: sc.task.kind().to_string(),
        seed: sc.seed,
        tolerance_scale: opts.tolerance_scale,
        checks: out.checks,
        values: out.values,
        pass: false,
    };
    report.finish();
    if let Some(dir) = &opts.out {
        let dir = dir.join(&sc.name);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("report.json"), to_json(&report)?)?;
        if let Some(rows) = &out.trajectory {
            let mut w = csv::Writer::from_path(dir.join("trajectory.csv")).map_err(csv_err)?;
            for r in rows {
                w.serialize(r).map_err(csv_err)?;
            }
            w.flush()?;
        }
    }
    Ok(Outcome::Scenario(report))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

pub fn to_json<T: serde::Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))
}

/// Parses and runs one scenario file.
pub fn run_scenario(path: &Path, opts: &RunOptions) -> Result<Outcome, CliError> {
    let sc = Scenario::from_path(path)?;
    run(&sc, path.parent().unwrap_or(Path::new(".")), opts)
}

/// Runs every `*.json` scenario of a directory in name order. A failing or
/// broken scenario marks the suite failed and the rest still run.
pub fn run_suite(dir: &Path, opts: &RunOptions) -> Result<Summary, CliError> {
    let entries =
        fs::read_dir(dir).map_err(|e| CliError::config(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    if files.is_empty() {
        warnings.push(format!("no scenarios in {}", dir.display()));
    }
    // scenarios run concurrently, each writing under its own output directory;
    // rows keep the sorted file order
    let outcomes: Vec<_> = files.par_iter().map(|f| run_scenario(f, opts)).collect();
    let mut seen = BTreeMap::new();
    for (f, outcome) in files.iter().zip(outcomes) {
        let name = f
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match outcome {
            Ok(Outcome::Scenario(r)) => {
                if let Some(prev) = seen.insert(r.scenario.clone(), name.clone()) {
                    warnings.push(format!(
                        "scenario name {} used by {prev} and {name}",
                        r.scenario
                    ));
                }
                reports.push(r);
            }
            Ok(Outcome::Suite(_)) => warnings.push(format!("{name}: nested suites are skipped")),
            Err(e) => errors.push((name, e.to_string())),
        }
    }
    let summary = Summary::new(&reports, errors, warnings);
    if let Some(out) = &opts.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("summary.txt"), summary.to_text())?;
        fs::write(out.join("summary.json"), to_json(&summary)?)?;
    }
    Ok(summary)
}
