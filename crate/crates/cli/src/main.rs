//! `cocycle-lab`: Lyapunov exponents, hyperbolicity certificates and
//! Hofstadter butterflies from the command line.
//!
//! Exit status is 0 on success, 1 on a usage or configuration error and 2
//! when a computation or its output fails.

mod args;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::args::{Alpha, Matrices, Reals, Resolutions};

#[derive(Debug, Parser)]
#[command(name = "cocycle-lab", version, about = "Lyapunov exponents and spectra of matrix cocycles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Barycentric exponent from triangle geometry and from the matrix cocycle.
    Barycentric(BarycentricArgs),
    /// Top Lyapunov exponent of a cocycle.
    Exponent(SpecCommand),
    /// Full Lyapunov spectrum by QR reorthonormalization.
    Spectrum(SpecCommand),
    /// Uniform hyperbolicity certificate.
    Certify(CertifyArgs),
    /// Spectrum verdicts along one frequency row.
    Slice(SliceArgs),
    /// Hofstadter butterfly raster written as PGM.
    Butterfly(ButterflyArgs),
    /// Furstenberg hypotheses and the top exponent of a random product.
    Furstenberg(FurstenbergArgs),
    /// Measure of a spectrum slice at several resolutions.
    Measure(MeasureArgs),
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// Master random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of steps.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Worker threads (default: COCYCLE_LAB_THREADS, else all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output file (stdout if omitted; required by `butterfly`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key = value` file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BarycentricArgs {
    #[command(flatten)]
    pub common: Common,
    /// Seed triangle: `equilateral` or `right-isosceles`.
    #[arg(long)]
    pub shape: Option<String>,
    /// Also write a CSV trace of the log aspect ratio.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub trace_every: Option<u64>,
}

/// Selects a cocycle. `--spec` is one of `toral`, `schrodinger`,
/// `barycentric`, `constant`, `random` or a built-in name.
#[derive(Debug, Args, Default)]
pub struct SpecArgs {
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    #[arg(long)]
    pub coupling: Option<f64>,
    #[arg(long)]
    pub alpha: Option<Alpha>,
    /// Row-major entries of one matrix (`constant`).
    #[arg(long, allow_hyphen_values = true)]
    pub matrix: Option<Reals>,
    /// Matrices separated by `;` (`random`).
    #[arg(long, allow_hyphen_values = true)]
    pub matrices: Option<Matrices>,
    #[arg(long)]
    pub probs: Option<Reals>,
}

#[derive(Debug, Args)]
pub struct SpecCommand {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub spec: SpecArgs,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub spec: SpecArgs,
    /// `cone` or `growth`.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct SliceParams {
    #[arg(long, allow_hyphen_values = true)]
    pub e_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub e_max: Option<f64>,
    #[arg(long)]
    pub coupling: Option<f64>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Phase grid size for the growth test.
    #[arg(long)]
    pub phases: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SliceArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub params: SliceParams,
    #[arg(long)]
    pub alpha: Option<Alpha>,
    /// `oracle` or `growth` (default: oracle for p/q, growth otherwise).
    #[arg(long)]
    pub method: Option<String>,
    /// Number of energies.
    #[arg(long)]
    pub width: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ButterflyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub params: SliceParams,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub q_max: Option<u64>,
    /// `farey` or `irrational`.
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct FurstenbergArgs {
    #[command(flatten)]
    pub common: Common,
    /// `barycentric`, `so2`, `positive` or `matrices`.
    #[arg(long)]
    pub set: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub matrices: Option<Matrices>,
    #[arg(long)]
    pub probs: Option<Reals>,
    /// Word length for the invariant-line search.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub params: SliceParams,
    #[arg(long)]
    pub alpha: Option<Alpha>,
    /// Comma-separated `grid:n_max` pairs.
    #[arg(long)]
    pub resolutions: Option<Resolutions>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
