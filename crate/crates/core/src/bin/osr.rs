//! Command-line front end: one verb per scenario kind, plus `aggregate`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use osr_core::harness::{aggregate, exit_code_of, run, RunOptions, RunStatus, Scenario, ScenarioKind, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "osr", version, about = "Orr–Sommerfeld resolvent, semigroup and stability checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed (overrides the scenario seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies every resolution of the scenario.
    #[arg(long, default_value_t = 1.0)]
    resolution_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Strong-concavity check of a profile.
    CheckProfile(RunArgs),
    /// One mode solve.
    Solve(RunArgs),
    /// Boundary-layer corrector and nonslip assembly.
    Corrector(RunArgs),
    /// Resolvent-estimate sweep.
    Sweep(RunArgs),
    /// Semigroup cross-validation and bounds.
    Semigroup(RunArgs),
    /// Stokes semigroup checks.
    Stokes(RunArgs),
    /// Nonlinear simulation.
    Simulate(RunArgs),
    /// Airy function checks.
    Airy(RunArgs),
    /// Merge JSONL report files into a cross-run summary.
    Aggregate {
        /// Report files.
        reports: Vec<PathBuf>,
        /// Output directory for `aggregate.json` and `trend.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run_verb(verb: &str, a: RunArgs) -> ExitCode {
    let kind = ScenarioKind::from_verb(verb).expect("every verb maps to a kind");
    let sc = match Scenario::load(&a.config) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("{}: {e}", a.config.display());
            return ExitCode::from(exit_code_of(&e) as u8);
        }
    };
    if sc.kind != kind {
        eprintln!("{}: scenario kind `{}` does not match verb `{verb}` (use `{}`)", a.config.display(), sc.kind.as_str(), sc.kind.verb());
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    let opts = RunOptions { out: a.out, seed: a.seed, resolution_scale: a.resolution_scale };
    match run(&sc, &opts) {
        Ok(summary) => {
            for c in &summary.checks {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                match &c.detail {
                    Some(d) => println!("{tag} {} = {:.6e} (threshold {:.3e}; {d})", c.name, c.value, c.threshold),
                    None => println!("{tag} {} = {:.6e} (threshold {:.3e})", c.name, c.value, c.threshold),
                }
            }
            if let Some(e) = &summary.error {
                eprintln!("error: {e}");
            }
            println!("status: {:?}", summary.status);
            ExitCode::from(summary.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(exit_code_of(&e) as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::CheckProfile(a) => run_verb("check-profile", a),
        Command::Solve(a) => run_verb("solve", a),
        Command::Corrector(a) => run_verb("corrector", a),
        Command::Sweep(a) => run_verb("sweep", a),
        Command::Semigroup(a) => run_verb("semigroup", a),
        Command::Stokes(a) => run_verb("stokes", a),
        Command::Simulate(a) => run_verb("simulate", a),
        Command::Airy(a) => run_verb("airy", a),
        Command::Aggregate { reports, out } => match aggregate(&reports, out.as_deref()) {
            Ok(s) => {
                for row in &s.rows {
                    let drift: Vec<String> = row.drift_percent.iter().map(|d| format!("{d:.2}%")).collect();
                    println!("{:28} count={:5} sup={:.6e} drift=[{}]", row.inequality_id, row.count, row.sup_ratio, drift.join(", "));
                }
                ExitCode::from(RunStatus::Pass.exit_code() as u8)
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(exit_code_of(&e) as u8)
            }
        },
    }
}
