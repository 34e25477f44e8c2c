use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kahler_cli::{run_scenario, run_suite, CliError, Outcome, RunOptions, Scenario};

#[derive(Parser)]
#[command(
    name = "kahlerlab",
    version,
    about = "Kähler geometry checks on model manifolds"
)]
struct Cli {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for reports, trajectories and summaries.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Multiplies every check tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Runs a scenario of any task kind.
    Run { scenario: PathBuf },
    /// Pointwise curvature, Berger and Royden checks.
    Curvature { scenario: PathBuf },
    /// Supremum of holomorphic sectional curvature over a model.
    HscSup { scenario: PathBuf },
    /// Unnormalized or normalized Kähler–Ricci flow.
    Flow { scenario: PathBuf },
    /// Continuity-method solves and trace estimates.
    Continuity { scenario: PathBuf },
    /// Chern numbers and Chern–Weil defect audits.
    Chern { scenario: PathBuf },
    /// Bounds on the least sup H over metrics in a class.
    MuBounds { scenario: PathBuf },
    /// Exact asymptotic expansions of class integrals.
    Expansion { scenario: PathBuf },
    /// Runs every scenario in a directory.
    Suite { dir: PathBuf },
}

fn expected_kinds(verb: &Verb) -> Option<&'static [&'static str]> {
    match verb {
        Verb::Run { .. } | Verb::Suite { .. } => None,
        Verb::Curvature { .. } => Some(&["curvature"]),
        Verb::HscSup { .. } => Some(&["hsc-sup"]),
        Verb::Flow { .. } => Some(&["flow", "normalized-flow"]),
        Verb::Continuity { .. } => Some(&["continuity"]),
        Verb::Chern { .. } => Some(&["chern", "my-audit"]),
        Verb::MuBounds { .. } => Some(&["mu-bounds"]),
        Verb::Expansion { .. } => Some(&["expansion"]),
    }
}

fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let opts = RunOptions {
        seed: cli.seed,
        out: cli.out.clone(),
        tolerance_scale: cli.tolerance_scale,
    };
    let path = match &cli.verb {
        Verb::Suite { dir } => return Ok(Outcome::Suite(run_suite(dir, &opts)?)),
        Verb::Run { scenario }
        | Verb::Curvature { scenario }
        | Verb::HscSup { scenario }
        | Verb::Flow { scenario }
        | Verb::Continuity { scenario }
        | Verb::Chern { scenario }
        | Verb::MuBounds { scenario }
        | Verb::Expansion { scenario } => scenario,
    };
    if let Some(kinds) = expected_kinds(&cli.verb) {
        let kind = Scenario::from_path(path)?.task.kind();
        if !kinds.contains(&kind) {
            return Err(CliError::config(format!(
                "task.kind: {kind} cannot run under this verb (expected {})",
                kinds.join(" or ")
            )));
        }
    }
    run_scenario(path, &opts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(Outcome::Scenario(r)) => {
            let summary =
                kahler_cli::Summary::new(std::slice::from_ref(&r), Vec::new(), Vec::new());
            print!("{}", summary.to_text());
            ExitCode::from(if r.pass { 0 } else { 1 })
        }
        Ok(Outcome::Suite(s)) => {
            print!("{}", s.to_text());
            ExitCode::from(if s.pass { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("kahlerlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
