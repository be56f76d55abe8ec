//! `threebody run <config>` integrates one scenario; `threebody verify` runs
//! the acceptance suite.

mod config;
mod output;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use threebody::verify::{verify_all, CriterionReport, DEFAULT_SEED};

use crate::config::ScenarioConfig;
use crate::output::write_atomic;
use crate::scenario::{run_scenario, RunError};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_BAD_CONFIG: u8 = 2;
const EXIT_INTEGRATION: u8 = 3;
const EXIT_OUTPUT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "threebody",
    version,
    about = "Zero-angular-momentum three-body scenarios"
)]
struct Cli {
    /// Output directory; overrides the directory named in a scenario file.
    #[arg(long, global = true, env = "THREEBODY_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write `<stem>.csv` and `<stem>.json`.
    Run { config: PathBuf },
    /// Run the acceptance criteria and print one line per criterion.
    Verify {
        /// Only criteria whose name contains this string, or whose number it is.
        #[arg(long)]
        filter: Option<String>,
        /// Seed for the randomized criteria.
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

fn run(config_path: &Path, out: Option<&Path>) -> ExitCode {
    let config = match ScenarioConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_BAD_CONFIG);
        }
    };
    let dir = out.unwrap_or(&config.output.dir);
    match run_scenario(&config, dir) {
        Ok(artifacts) => {
            for c in &artifacts.summary.checks {
                println!(
                    "{} {} = {:.3e} (<= {:.1e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.tolerance
                );
            }
            println!("wrote {}", artifacts.csv.display());
            println!("wrote {}", artifacts.json.display());
            if artifacts.summary.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
        Err(RunError::Integration(e)) => {
            eprintln!("integration failed: {e:?}");
            ExitCode::from(EXIT_INTEGRATION)
        }
        Err(e @ RunError::Output { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_OUTPUT)
        }
    }
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    seed: u64,
    passed: bool,
    criteria: &'a [CriterionReport],
}

fn verify(filter: Option<&str>, seed: u64, out: Option<&Path>) -> ExitCode {
    let reports = verify_all(filter, seed);
    if reports.is_empty() {
        eprintln!("no criterion matches {:?}", filter.unwrap_or_default());
        return ExitCode::from(EXIT_BAD_CONFIG);
    }
    println!(
        "{:<4} {:>2} {:<28} {:>12} {:>10}",
        "", "id", "criterion", "measured", "tolerance"
    );
    for r in &reports {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        match (&r.error, r.checks.first()) {
            (Some(e), _) => println!("{verdict} {:>2} {:<28} error: {e}", r.id, r.name),
            (None, Some(c)) => println!(
                "{verdict} {:>2} {:<28} {:>12.3e} {:>10.1e}",
                r.id, r.name, c.measured, c.tolerance
            ),
            (None, None) => println!("{verdict} {:>2} {:<28} no checks", r.id, r.name),
        }
    }
    let passed = reports.iter().all(|r| r.passed);
    let n_pass = reports.iter().filter(|r| r.passed).count();
    println!("{n_pass}/{} criteria passed", reports.len());
    if let Some(dir) = out {
        let report = VerifyReport {
            seed,
            passed,
            criteria: &reports,
        };
        let path = dir.join("verify.json");
        let text = serde_json::to_string_pretty(&report).expect("reports serialize");
        if let Err(e) = write_atomic(&path, text.as_bytes()) {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(EXIT_OUTPUT);
        }
        println!("wrote {}", path.display());
    }
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run { config } => run(config, cli.out.as_deref()),
        Command::Verify { filter, seed } => verify(filter.as_deref(), *seed, cli.out.as_deref()),
    }
}
