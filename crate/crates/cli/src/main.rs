//! `jrenorm`: batch front end for the renormalization library. Parses a JSON
//! run configuration, executes one subcommand, and writes machine-readable
//! results. Exit codes: 0 success, 2 configuration error, 3 numerical error,
//! 4 verification failure.

mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use commands::Failure;
use config::RunConfig;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

/// Construct almost periodic Jacobi operators over towers of expanding
/// polynomials and verify their defining identities.
#[derive(Parser)]
#[command(name = "jrenorm", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tower; write coefficients.csv and report.json.
    Build(CommonArgs),
    /// Check the defining identities; write verify.json.
    Verify(VerifyArgs),
    /// Compute nested spectral bands and eigenvalue coverage; write bands.json.
    Bands(CommonArgs),
    /// Tabulate the shift metric along the radix filtration; write metric.csv.
    Metric(CommonArgs),
    /// Estimate contraction constants from random seed pairs; write probe.json.
    Probe(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (default: the config's out_dir, then ".").
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated subset of checks: identity, polynomial, wronskian,
    /// chain, translation, roundtrip (default: all).
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    checks: Vec<String>,
    /// Corrupt one coefficient of the built operator before checking:
    /// "<p|q>:<site>:<delta>", e.g. "q:3:0.05".
    #[arg(long, value_name = "SPEC")]
    perturb: Option<String>,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn run() -> Result<(), Failure> {
    configure_threads()?;
    let cli = Cli::parse();
    match &cli.command {
        Command::Build(args) => {
            let (config, out) = load(args)?;
            commands::build(&config, &out)
        }
        Command::Verify(args) => {
            let (config, out) = load(&args.common)?;
            commands::verify(&config, &out, &args.checks, args.perturb.as_deref())
        }
        Command::Bands(args) => {
            let (config, out) = load(args)?;
            commands::bands(&config, &out)
        }
        Command::Metric(args) => {
            let (config, out) = load(args)?;
            commands::metric(&config, &out)
        }
        Command::Probe(args) => {
            let (config, out) = load(args)?;
            commands::probe(&config, &out)
        }
    }
}

/// Read and parse the config, resolve the output directory, and make sure it
/// exists.
fn load(args: &CommonArgs) -> Result<(RunConfig, PathBuf), Failure> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.config.display())))?;
    let out = args
        .out
        .clone()
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out).map_err(|e| Failure::Config(format!("{}: {e}", out.display())))?;
    Ok((config, out))
}

/// Honor RENORM_THREADS as a cap on block-level parallelism.
fn configure_threads() -> Result<(), Failure> {
    let raw = match std::env::var("RENORM_THREADS") {
        Err(std::env::VarError::NotPresent) => return Ok(()),
        Err(e) => return Err(Failure::Config(format!("RENORM_THREADS: {e}"))),
        Ok(raw) => raw,
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            Failure::Config(format!(
                "RENORM_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Config(format!("could not size the thread pool: {e}")))
}
