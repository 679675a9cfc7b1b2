mod commands;
mod params;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::params::ParamArgs;

/// Force-noise spectra of a hybrid optomechanical sensor.
#[derive(Parser, Debug)]
#[command(name = "cqnc", version)]
struct Cli {
    /// Worker threads for grid evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectra versus detection frequency.
    Spectrum(SpectrumArgs),
    /// Datasets for the figure panels (fig2a … fig5c, or `all`).
    Figures(FiguresArgs),
    /// Drift-matrix eigenvalues and validity checks.
    Stability(StabilityArgs),
    /// One-parameter sweeps and minimisation over the drive power.
    Sweep(SweepArgs),
    /// Steady-state amplitudes and effective couplings.
    SteadyState(SteadyStateArgs),
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value = "0.2omega_m")]
    pub omega_min: String,
    #[arg(long, default_value = "1.8omega_m")]
    pub omega_max: String,
    #[arg(long, default_value_t = 500)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = SpacingArg::Linear)]
    pub spacing: SpacingArg,
    /// Comma-separated columns: S_sql, S_standard, S_hybrid_approx,
    /// S_hybrid_exact, S_cqnc, S_oracle, S_shot.
    #[arg(long, default_value = "S_sql,S_hybrid_approx,S_hybrid_exact,S_cqnc")]
    pub sources: String,
    /// Hold the effective coupling g fixed (the drive power is adjusted).
    #[arg(long)]
    pub g: Option<String>,
    /// CSV path; a JSON sidecar is written next to it. Default: stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Emit oracle spectra even when the drift matrix is not Hurwitz.
    #[arg(long)]
    pub allow_unstable: bool,
}

#[derive(Args, Debug)]
pub struct FiguresArgs {
    #[arg(required = true)]
    pub which: Vec<String>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum)]
    pub axis: AxisArg,
    /// min:max in the axis' units (frequencies accept suffixes, powers W…pW,
    /// angles rad or `pi` multiples).
    #[arg(long)]
    pub range: Option<String>,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Default: log for power and coupling, linear otherwise.
    #[arg(long, value_enum)]
    pub spacing: Option<SpacingArg>,
    #[arg(long, default_value = "S_hybrid_approx")]
    pub sources: String,
    /// Detection frequency: `resonance` or a frequency.
    #[arg(long, default_value = "resonance")]
    pub omega_at: String,
    #[arg(long)]
    pub g: Option<String>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub allow_unstable: bool,
    /// Minimise over the drive power instead of sweeping; prints JSON.
    #[arg(long)]
    pub minimize: bool,
    #[arg(long, value_enum, default_value_t = FormulaArg::Standard)]
    pub formula: FormulaArg,
}

#[derive(Args, Debug)]
pub struct SteadyStateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Report the state at this effective coupling instead of the configured power.
    #[arg(long)]
    pub g: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpacingArg {
    Linear,
    Log,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisArg {
    Omega,
    Power,
    OpaGain,
    Theta,
    Detuning,
    CouplingRatio,
    Coupling,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormulaArg {
    Standard,
    HybridApprox,
    HybridExact,
    Oracle,
}

/// Failure carrying the process exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_UNSTABLE_ORACLE: u8 = 3;
pub const EXIT_UNSTABLE: u8 = 4;

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<cqnc_core::Error> for Failure {
    fn from(e: cqnc_core::Error) -> Self {
        use cqnc_core::Error as E;
        let code = match e {
            E::InvalidParams { .. } | E::Config(_) | E::InvalidSweep(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool is configured once");
    }
    let result = match cli.command {
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Figures(a) => commands::figures(a),
        Command::Stability(a) => commands::stability(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::SteadyState(a) => commands::steady_state(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
