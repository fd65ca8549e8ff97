use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hubbard_poisson::TimeMode;

#[derive(Debug, Parser)]
#[command(name = "hubbard-poisson", version, about = "Hubbard-model propagators from Poisson jump processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo estimate of one element, or of the whole column when --to is omitted.
    Propagate(PropagateArgs),
    /// Exact propagator block of the sector containing --from.
    Exact(ExactArgs),
    /// Monte Carlo estimates against the exact propagator, with z-scores.
    Compare(CompareArgs),
    /// One estimate per rate multiplier, checked for mutual consistency.
    ScanRates(ScanArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Real,
    Imag,
}

impl From<Mode> for TimeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Real => TimeMode::RealTime,
            Mode::Imag => TimeMode::ImaginaryTime,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// JSON model file.
    #[arg(long, value_name = "PATH", conflicts_with = "chain", required_unless_present = "chain")]
    pub config: Option<PathBuf>,
    /// Open nearest-neighbour chain with this many sites instead of a config file.
    #[arg(long, value_name = "L")]
    pub chain: Option<usize>,
    /// Chain hopping.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub eta: f64,
    /// Chain on-site interaction.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub gamma: f64,
    /// Draw chain hoppings (per link and spin) and interactions (per site) uniformly from the ranges below.
    #[arg(long, value_name = "SEED", requires = "chain")]
    pub disorder_seed: Option<u64>,
    #[arg(long, value_name = "LO,HI", default_value = "0.5,1.5", allow_hyphen_values = true)]
    pub eta_range: String,
    #[arg(long, value_name = "LO,HI", default_value = "0,4", allow_hyphen_values = true)]
    pub gamma_range: String,
    /// Also draw spin-dependent site energies from this range.
    #[arg(long, value_name = "LO,HI", allow_hyphen_values = true)]
    pub site_energy_range: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct StateArgs {
    /// Initial configuration, UP/DOWN bit strings with site 1 leftmost (e.g. 1000/0100).
    #[arg(long, value_name = "BITS/BITS")]
    pub from: String,
    /// Final configuration.
    #[arg(long, value_name = "BITS/BITS")]
    pub to: Option<String>,
    #[arg(long)]
    pub t: f64,
    #[arg(long, value_enum, default_value_t = Mode::Real)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Args)]
pub struct SamplingArgs {
    #[arg(long, default_value_t = 100_000)]
    pub ntraj: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads, 0 for available parallelism. Does not change results.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Multiply every Poisson rate by this factor.
    #[arg(long, allow_hyphen_values = true)]
    pub rate_mult: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct PropagateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Write one line per jump of the first trajectories to this file.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Number of trajectories to trace.
    #[arg(long, default_value_t = 1)]
    pub trace_count: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Any configuration of the wanted sector.
    #[arg(long, value_name = "BITS/BITS")]
    pub from: String,
    #[arg(long)]
    pub t: f64,
    #[arg(long, value_enum, default_value_t = Mode::Real)]
    pub mode: Mode,
    /// Refuse sectors larger than this.
    #[arg(long, default_value_t = 5000)]
    pub max_dim: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long, default_value_t = 4.0)]
    pub z_threshold: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_dim: usize,
    /// Take the exact side from a different model file (negative controls).
    #[arg(long, value_name = "PATH")]
    pub oracle_config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Rates are multiplier * |eta| for each listed multiplier.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2", allow_hyphen_values = true)]
    pub multipliers: Vec<f64>,
}
