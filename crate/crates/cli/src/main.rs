use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use infocap_cli::checks::run_checks;
use infocap_cli::config::Config;
use infocap_cli::experiments::{cortical, mind, stairs};
use infocap_core::Error;

/// Discriminative MI estimation, capacity learning, and neural decoding
/// experiments on synthetic channels.
#[derive(Parser)]
#[command(name = "infocap", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Staircase MI benchmark over the estimator families.
    Stairs(RunArgs),
    /// Capacity-learner sweeps (constellations, capacity, bounds).
    Cortical(RunArgs),
    /// Decoder sweeps (SER and entropy readouts vs the genie oracles).
    Mind(RunArgs),
    /// Deterministic analytic check suite; non-zero exit on any failure.
    Checks(ChecksArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for records.csv, metrics.csv, summary.txt.
    #[arg(long)]
    out: PathBuf,
    /// Master seed; combined with per-cell streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (falls back to INFOCAP_THREADS, then rayon default).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ChecksArgs {
    /// Optional directory for a checks report file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn threads_from(args: &RunArgs) -> Option<usize> {
    args.threads.or_else(|| {
        std::env::var("INFOCAP_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

enum Outcome {
    Ok,
    ChecksFailed,
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    match cli.command {
        Command::Stairs(args) => {
            let config = Config::load(&args.config)?;
            let sc = stairs::StairsConfig::from_scoped(&config.scoped("stairs"))?;
            let output = stairs::run(&sc, args.seed, threads_from(&args))?;
            output.persist(&args.out)?;
            for line in &output.summary {
                println!("{line}");
            }
            Ok(Outcome::Ok)
        }
        Command::Cortical(args) => {
            let config = Config::load(&args.config)?;
            let cc = cortical::CorticalRunConfig::from_scoped(&config.scoped("cortical"))?;
            let (output, _) = cortical::run(&cc, args.seed, threads_from(&args))?;
            output.persist(&args.out)?;
            for line in &output.summary {
                println!("{line}");
            }
            Ok(Outcome::Ok)
        }
        Command::Mind(args) => {
            let config = Config::load(&args.config)?;
            let mc = mind::MindRunConfig::from_scoped(&config.scoped("mind"))?;
            let (output, _) = mind::run(&mc, args.seed, threads_from(&args))?;
            output.persist(&args.out)?;
            for line in &output.summary {
                println!("{line}");
            }
            Ok(Outcome::Ok)
        }
        Command::Checks(args) => {
            let report = run_checks();
            for line in report.lines() {
                println!("{line}");
            }
            if let Some(dir) = args.out {
                infocap_cli::records::write_summary(&dir.join("summary.txt"), &report.lines())?;
            }
            if report.passed() {
                Ok(Outcome::Ok)
            } else {
                Ok(Outcome::ChecksFailed)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(4),
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e @ Error::Numeric(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
