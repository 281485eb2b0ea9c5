use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use csma_cli::analyze::{cmd_analyze, AnalyzeConfig};
use csma_cli::config::{read_json, ExperimentPlan};
use csma_cli::simulate::cmd_simulate;
use csma_cli::suites::{cmd_verify, VerifyOptions};
use csma_cli::thresholds::cmd_thresholds;
use csma_cli::{resolve_workers, CliError};

#[derive(Parser)]
#[command(name = "csma", version, about = "Queue-weighted CSMA scheduling: simulation, exact chain analysis and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (weight kind, load, seed) combination of a plan.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to CSMA_WORKERS, then the core count.
        #[arg(long)]
        workers: Option<usize>,
        /// Added to every seed in the plan.
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
    },
    /// Exact spectral and conductance report for a small network.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suites; exits 1 if any case fails.
    Verify {
        /// Exponent of the LOG_POWER member under test.
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Log-scale q_th, t* and B.
    Thresholds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value = "LOG_OVER_LOGLOG")]
        kind: String,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            workers,
            seed_base,
        } => {
            let plan = ExperimentPlan::load(&config, seed_base)?;
            let workers = resolve_workers(workers)?;
            let summary = cmd_simulate(&plan, &out, workers)?;
            eprintln!(
                "wrote {} runs to {}",
                summary.runs.len(),
                out.display()
            );
            Ok(())
        }
        Command::Analyze { config, out } => {
            let cfg: AnalyzeConfig = read_json(&config)?;
            emit(&cmd_analyze(&cfg)?, out.as_deref())
        }
        Command::Verify {
            theta,
            instances,
            seed_base,
            out,
        } => {
            let report = cmd_verify(&VerifyOptions {
                theta,
                seed: seed_base,
                instances,
            });
            emit(&report, out.as_deref())?;
            if report.passed {
                Ok(())
            } else {
                let failed: Vec<_> = report.suites.iter().filter(|s| !s.passed).map(|s| s.name).collect();
                Err(CliError::Verification(failed.join(", ")))
            }
        }
        Command::Thresholds {
            n,
            epsilon,
            delta,
            kind,
            theta,
            out,
        } => emit(&cmd_thresholds(n, epsilon, delta, &kind, theta)?, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
