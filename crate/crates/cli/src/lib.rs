//! Command-line front end: single-point reports, closed-form verification,
//! optimization and sweeps to CSV, and Monte Carlo checks.
//!
//! Exit codes are 0 for success, 1 when a check fails and 2 for invalid input.

pub mod commands;
pub mod config;
pub mod csv;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::Outcome;

/// Seed used when neither a flag, a config file nor the environment sets one.
pub const DEFAULT_SEED: u64 = 42;
/// Environment variable that replaces [`DEFAULT_SEED`].
pub const SEED_ENV: &str = "TELEPROBE_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] teleprobe::Error),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use teleprobe::Error as E;
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Core(
                E::InvalidParameter { .. }
                | E::Infeasible { .. }
                | E::SensitivityUndefined
                | E::DegenerateMeasurement { .. },
            ) => EXIT_INVALID,
            CliError::Core(_) | CliError::Io { .. } => EXIT_CHECK_FAILED,
        }
    }

    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "teleprobe",
    version,
    about = "Phase estimation with a repeatedly teleported probe"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulator moments next to the closed forms at one parameter point.
    #[command(allow_negative_numbers = true)]
    Point(PointArgs),
    /// Compare simulator and closed forms on a seeded random grid.
    #[command(allow_negative_numbers = true)]
    Verify(VerifyArgs),
    /// Best strategy for one photon budget, as one CSV row.
    #[command(allow_negative_numbers = true)]
    Optimize(OptimizeArgs),
    /// Optimize over a grid of constraints, one CSV row per point.
    #[command(allow_negative_numbers = true)]
    Sweep(SweepArgs),
    /// Sample trajectories and compare with the ensemble moments.
    #[command(allow_negative_numbers = true)]
    Montecarlo(MonteCarloArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArg {
    /// key = value file; flags override its entries.
    #[arg(long, short = 'c', value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProbeArgs {
    /// Initial coherent amplitude.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Phase per pass, radians.
    #[arg(long)]
    pub phi: Option<f64>,
    /// Two-mode squeezing parameter.
    #[arg(long)]
    pub r: Option<f64>,
    /// Number of teleportations.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long = "g-x")]
    pub g_x: Option<f64>,
    #[arg(long = "g-p")]
    pub g_p: Option<f64>,
    /// Probe transmission per pass.
    #[arg(long)]
    pub eta1: Option<f64>,
    /// Resource transmission.
    #[arg(long)]
    pub eta2: Option<f64>,
    /// Thermal photons added with the resource loss.
    #[arg(long = "n-th")]
    pub n_th: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub probe: ProbeArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long = "n-points")]
    pub n_points: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run the simulator with the phase sign flipped (negative control).
    #[arg(long = "corrupt-convention", hide = true)]
    pub corrupt_convention: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub r: Option<f64>,
    /// Total photon budget through the phase shift.
    #[arg(long = "n-total")]
    pub n_total: Option<f64>,
    #[arg(long)]
    pub eta1: Option<f64>,
    #[arg(long)]
    pub eta2: Option<f64>,
    #[arg(long = "n-th")]
    pub n_th: Option<f64>,
    /// Fix both feed-forward gains to one.
    #[arg(long = "unit-gains", num_args = 0..=1, default_missing_value = "true")]
    pub unit_gains: Option<bool>,
    /// Upper bound on the teleportation count.
    #[arg(long = "m-max")]
    pub m_max: Option<usize>,
    /// Write the CSV here instead of standard output.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, value_delimiter = ',')]
    pub r: Vec<f64>,
    #[arg(long = "n-total", value_delimiter = ',')]
    pub n_total: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub eta1: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub eta2: Vec<f64>,
    #[arg(long = "n-th", value_delimiter = ',')]
    pub n_th: Vec<f64>,
    #[arg(long = "unit-gains", value_delimiter = ',')]
    pub unit_gains: Vec<bool>,
    #[arg(long = "m-max")]
    pub m_max: Option<usize>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MonteCarloArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub probe: ProbeArgs,
    #[arg(long = "n-traj")]
    pub n_traj: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest accepted |z| on mean and variance.
    #[arg(long = "z-max")]
    pub z_max: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match commands::dispatch(&cli.command, out) {
        Ok(Outcome::Pass) => EXIT_OK,
        Ok(Outcome::Fail) => EXIT_CHECK_FAILED,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
