//! `rssm`: fit, calibrate, call, simulate and score array CGH series.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "rssm", version, about = "Robust state space model for array CGH data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the MCMC sampler on one series and write posterior summaries.
    Fit(FitArgs),
    /// Compute the breakpoint threshold from a normal reference.
    Calibrate(CalibrateArgs),
    /// Call breakpoints and outliers from a fit.
    Call(CallArgs),
    /// Write a simulated chromosome suite with its ground truth.
    Simulate(SimulateArgs),
    /// ROC curves of fitted signals against truth tables.
    Roc(RocArgs),
}

#[derive(Args, Clone, Default)]
pub struct Common {
    /// TOML file with run settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed. A random seed is drawn and recorded when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
pub struct InputArgs {
    /// Probe table with position and value columns (comma or tab).
    #[arg(long, conflicts_with = "sim_spec")]
    pub input: Option<PathBuf>,
    /// Simulation spec (JSON or TOML) to draw the series from.
    #[arg(long)]
    pub sim_spec: Option<PathBuf>,
    /// Chromosome of the simulated suite.
    #[arg(long, default_value_t = 0, requires = "sim_spec")]
    pub sim_index: usize,
}

#[derive(Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub input: InputArgs,
    /// Credible interval level for the summary table.
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Series to analyse. Required for --pseudo; otherwise sets the
    /// segment length of the reference.
    #[command(flatten)]
    pub input: InputArgs,
    /// Bootstrap reference resampled from the input series.
    #[arg(long, conflicts_with_all = ["reference", "simulated"])]
    pub pseudo: bool,
    /// Measured normal-versus-normal probe table.
    #[arg(long, conflicts_with = "simulated")]
    pub reference: Option<PathBuf>,
    /// Simulated N(0, sd^2) reference with this sd.
    #[arg(long, value_name = "SD")]
    pub simulated: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Probes in a simulated or pseudo reference.
    #[arg(long)]
    pub reference_length: Option<usize>,
    /// Fit the reference in segments of this many probes.
    #[arg(long, conflicts_with = "whole")]
    pub segment_length: Option<usize>,
    /// Fit the reference as a single series.
    #[arg(long)]
    pub whole: bool,
}

#[derive(Args)]
pub struct CallArgs {
    /// Directory written by `rssm fit`.
    #[arg(long)]
    pub fit: PathBuf,
    /// Calibration file written by `rssm calibrate`.
    #[arg(long, conflicts_with = "q_alpha")]
    pub calibration: Option<PathBuf>,
    /// Breakpoint threshold, bypassing calibration.
    #[arg(long)]
    pub q_alpha: Option<f64>,
    /// Outlier threshold.
    #[arg(long)]
    pub q_eps: Option<f64>,
    /// Seed for comparison pools; defaults to the fit's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to the fit directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Simulation spec (JSON or TOML); flags override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Fraction of probes replaced by outliers.
    #[arg(long)]
    pub outliers: Option<f64>,
    /// Add a width-5, SNR-4 aberration outside the main block.
    #[arg(long)]
    pub second_aberration: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RocArgs {
    /// Summary tables written by `rssm fit`, paired in order with --truth.
    #[arg(long, required = true)]
    pub summary: Vec<PathBuf>,
    /// Truth tables written by `rssm simulate`.
    #[arg(long, required = true)]
    pub truth: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Call(a) => commands::call(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Roc(a) => commands::roc(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
