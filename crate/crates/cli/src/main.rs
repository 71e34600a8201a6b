//! `mtrd` — compute information-density spectra, rate-distortion frontiers,
//! and Monte Carlo binning experiments for small discrete multiterminal
//! sources. Every artifact is plain CSV/JSON; identical command lines with
//! identical seeds produce byte-identical CSVs.

mod artifact;
mod commands;
mod emit;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit codes: 0 ok, 1 check failed, 2 input error, 3 infeasible distortion,
/// 4 budget exceeded.
#[derive(Debug)]
pub enum Failure {
    Core(mtrd_core::Error),
    /// Malformed flags or config files.
    Input(String),
    /// A verification subcommand found a real mismatch.
    CheckFailed(String),
}

impl From<mtrd_core::Error> for Failure {
    fn from(e: mtrd_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(mtrd_core::Error::from(e))
    }
}

pub type CliResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "mtrd",
    version,
    about = "Multiterminal rate-distortion: spectra, regions, binning experiments",
    after_help = "Set MTRD_LOG=1 for progress lines on stderr.\n\
                  Exit codes: 0 ok, 1 check failed, 2 input error, 3 infeasible, 4 budget."
)]
struct Cli {
    /// Cap rayon worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory artifacts are written into (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact density spectra over a blocklength grid, plus quantile proxies.
    Spectrum(SpectrumArgs),
    /// Rate-distortion frontier of a memoryless source (test-channel search).
    Region(RegionArgs),
    /// Single-terminal rate with decoder side information.
    Wz(RegionArgs),
    /// Frontier of a two-component mixed source (worst-case over components).
    MixedRegion(RegionArgs),
    /// Monte Carlo random-binning experiment from a config file.
    Simulate(SimulateArgs),
    /// Check the searched lossless (D=0) region against entropy bounds.
    SwCheck(SwCheckArgs),
}

#[derive(Args)]
pub struct SpectrumArgs {
    /// Source model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Density to evaluate: entropy:V1,V2 | cond-entropy:T1,T2/G1 |
    /// mutual:L1,L2/R1 | multi:V1,V2,V3 (variable names from the model).
    #[arg(long)]
    pub kind: String,
    /// Blocklengths, e.g. 64,256,1024.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n_grid: Vec<u32>,
    /// Tail mass for the quantile proxies, in (0, 0.5).
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Atom budget per convolution.
    #[arg(long, default_value_t = 2_000_000)]
    pub budget: u64,
}

#[derive(Args)]
pub struct RegionArgs {
    /// Source model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// "hamming" (one measure per terminal) or a JSON file of measures
    /// [{"y_size": k, "table": [...]}] flattened x-major.
    #[arg(long, default_value = "hamming")]
    pub distortion: String,
    /// Distortion targets, one per measure (omit for lossless: all zero).
    #[arg(long = "D", value_delimiter = ',', allow_hyphen_values = true)]
    pub d: Option<Vec<f64>>,
    /// Test-channel output sizes per terminal (default |X|+2 each).
    #[arg(long, value_delimiter = ',')]
    pub aux_size: Option<Vec<usize>>,
    /// Independent search restarts.
    #[arg(long, default_value_t = 200)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Experiment config JSON (model/channel references, rates, targets,
    /// n_grid, trials, seed, optional slacks).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config's blocklength grid.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<u32>>,
    /// Override the config's trial count.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Override the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the config's rates (nats/symbol, one per terminal).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub rates: Option<Vec<f64>>,
    /// Take rates and channels from a frontier run's achieving.json
    /// (the corner with the least sum rate).
    #[arg(long)]
    pub rates_from: Option<PathBuf>,
}

#[derive(Args)]
pub struct SwCheckArgs {
    /// Source model JSON (memoryless).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest |searched - entropy| gap that still passes, nats.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

/// MTRD_LOG gate: any value except "", "0", "off" enables stderr progress.
pub fn verbose() -> bool {
    static ON: std::sync::OnceLock<bool> = std::sync::OnceLock::new();
    *ON.get_or_init(|| {
        std::env::var("MTRD_LOG")
            .map(|v| !v.is_empty() && v != "0" && v != "off")
            .unwrap_or(false)
    })
}

#[macro_export]
macro_rules! vlog {
    ($($t:tt)*) => {
        if $crate::verbose() {
            eprintln!($($t)*);
        }
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        // A second build_global in one process is harmless; the pool is set
        // once and the error is only "already initialized".
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let argv: Vec<String> = std::env::args().collect();
    let result = match &cli.command {
        Command::Spectrum(a) => commands::spectrum(a, &cli.out_dir, &argv),
        Command::Region(a) => commands::region(a, &cli.out_dir, &argv),
        Command::Wz(a) => commands::wz(a, &cli.out_dir, &argv),
        Command::MixedRegion(a) => commands::mixed_region(a, &cli.out_dir, &argv),
        Command::Simulate(a) => commands::simulate(a, &cli.out_dir, &argv),
        Command::SwCheck(a) => commands::sw_check(a, &cli.out_dir, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            emit::error_json(&failure);
            ExitCode::from(exit_code(&failure))
        }
    }
}

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::CheckFailed(_) => 1,
        Failure::Input(_) => 2,
        Failure::Core(mtrd_core::Error::InfeasibleDistortion { .. }) => 3,
        Failure::Core(mtrd_core::Error::BudgetExceeded { .. }) => 4,
        Failure::Core(_) => 2,
    }
}
