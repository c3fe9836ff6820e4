mod commands;
mod config;
mod error;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

/// Bloch bands of a waveguide cut by a periodic array of thin cracks.
#[derive(Debug, Parser)]
#[command(name = "crackband", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Exit with status 3 if any band point fails.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lowest Neumann eigenpairs of the closed cell.
    Modes(Overrides),
    /// Dispersion table over the quasimomentum grid, as CSV.
    Band(Overrides),
    /// Fits the leading shift coefficient to a band CSV.
    Fit(Overrides),
    /// Scaled inner product of the inverse log operator with the Bloch trace.
    Prop2(Overrides),
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(value: &impl Serialize, path: Option<&Path>) -> Result<(), CliError> {
    let mut out = open_out(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Compute(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn run(command: &Command, strict: bool) -> Result<(), CliError> {
    match command {
        Command::Modes(flags) => {
            let cfg = RunConfig::resolve(flags)?;
            commands::modes(&cfg, open_out(cfg.out.as_deref())?)
        }
        Command::Band(flags) => {
            let cfg = RunConfig::resolve(flags)?;
            cfg.validate_band()?;
            let rows = commands::band_entries(&cfg)?;
            let failures = commands::write_band(&rows, open_out(cfg.out.as_deref())?)?;
            if strict && failures > 0 {
                return Err(CliError::Strict(format!("{failures} of {} band points failed", rows.len())));
            }
            Ok(())
        }
        Command::Fit(flags) => {
            let cfg = RunConfig::resolve(flags)?;
            let path = cfg
                .input
                .clone()
                .ok_or_else(|| CliError::Config("field `input`: band CSV required".into()))?;
            let file = File::open(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let entries = commands::read_band(file)?;
            let report = commands::fit(&cfg, entries)?;
            write_json(&report, cfg.out.as_deref())
        }
        Command::Prop2(flags) => {
            let cfg = RunConfig::resolve(flags)?;
            cfg.validate_epsilons()?;
            let report = commands::prop2(&cfg)?;
            write_json(&report, cfg.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    match cli.jobs {
        Some(0) => {
            eprintln!("error: {}", CliError::Config("field `jobs`: must be at least 1".into()));
            return ExitCode::from(2);
        }
        Some(n) => pool = pool.num_threads(n),
        None => {}
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| run(&cli.command, cli.strict)),
        Err(e) => Err(CliError::Compute(e.to_string())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
