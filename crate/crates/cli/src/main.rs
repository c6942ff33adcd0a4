//! `ddegk`: spectra, center-manifold reductions, bifurcation diagrams and
//! stochastic runs of the Suarez-Schopf delay oscillator, written as CSV and
//! JSON.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{execute, DdeArgs, DiagramArgs, OrbitArgs, PsdArgs, ReduceArgs, SpectrumArgs, TspArgs};

/// Exit status: 0 success, 2 configuration error, 3 numerical failure,
/// 4 I/O error. Each run also writes `<command>_meta.json`, which can be
/// passed back through `--config` to repeat the run.
#[derive(Parser)]
#[command(name = "ddegk", version, about)]
struct Cli {
    /// Settings file: flat TOML keys, or a metadata JSON of an earlier run
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// GK eigenvalues over a delay grid, optionally the Hopf point
    Spectrum(SpectrumArgs),
    /// Coefficients and equilibria of the 2D reduced system
    Reduce(ReduceArgs),
    /// Orbit families over a delay range and the global bifurcation values
    Diagram(DiagramArgs),
    /// One periodic orbit of the reduced system, lifted to the DDE variable
    Orbit(OrbitArgs),
    /// Direct DDE integration and its periodic orbit
    Dde(DdeArgs),
    /// Stochastic paths with a drifting delay, spectra and band-passed series
    Tsp(TspArgs),
    /// Welch spectrum of a column of a CSV file
    Psd(PsdArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = cli.config.as_deref();
    let result = match &cli.command {
        Cmd::Spectrum(a) => execute(a, cfg),
        Cmd::Reduce(a) => execute(a, cfg),
        Cmd::Diagram(a) => execute(a, cfg),
        Cmd::Orbit(a) => execute(a, cfg),
        Cmd::Dde(a) => execute(a, cfg),
        Cmd::Tsp(a) => execute(a, cfg),
        Cmd::Psd(a) => execute(a, cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ddegk: {e}");
            e.exit_code()
        }
    }
}
