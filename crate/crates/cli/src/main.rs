//! `ftwist`: inspect, verify and classify twisted-product Finsler metrics
//! and integrate their geodesics.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use ftwist_core::SCHEMA_VERSION;
use serde_json::json;

use config::{Format, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "ftwist", version, about = "Twisted-product Finsler metrics checked against a finite-difference oracle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print every closed-form block at one sample
    Inspect(Args),
    /// Compare every closed form against the oracle
    Verify(Args),
    /// Run all classification predicates
    Classify(Args),
    /// Integrate a geodesic with RK4
    Geodesic(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces every default tolerance
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include wall-clock timing in the report
    #[arg(long)]
    timing: bool,
    /// Perturb the closed form of the named identity (fault injection)
    #[arg(long, hide = true)]
    corrupt: Option<String>,
}

impl Command {
    fn parts(&self) -> (&'static str, &Args) {
        match self {
            Command::Inspect(a) => ("inspect", a),
            Command::Verify(a) => ("verify", a),
            Command::Classify(a) => ("classify", a),
            Command::Geodesic(a) => ("geodesic", a),
        }
    }
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.tol {
        cfg.tolerance = Some(t);
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let (name, args) = cli.command.parts();
    let cfg = load(args)?;
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::Inspect(_) => commands::inspect(&cfg)?,
        Command::Verify(a) => commands::verify_cmd(&cfg, a.corrupt.clone())?,
        Command::Classify(_) => commands::classify_cmd(&cfg)?,
        Command::Geodesic(_) => commands::geodesic_cmd(&cfg)?,
    };
    let elapsed = start.elapsed().as_secs_f64();
    let body = match cfg.format {
        Format::Json => {
            let mut report = json!({
                "schema_version": SCHEMA_VERSION,
                "command": name,
                "config": cfg,
                "result": outcome.result,
                "exit_code": outcome.exit,
            });
            if args.timing {
                report["timing"] = json!({ "seconds": elapsed });
            }
            let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv => format!("# schema_version {SCHEMA_VERSION}\n{}", outcome.csv),
        Format::Text => {
            let mut s = format!("ftwist {name} (schema {SCHEMA_VERSION}, seed {})\n{}", cfg.seed, outcome.text);
            if args.timing {
                s.push_str(&format!("elapsed {elapsed:.3} s\n"));
            }
            s
        }
    };
    match &args.out {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(outcome.exit)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("ftwist: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
