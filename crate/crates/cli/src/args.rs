use std::path::PathBuf;

use adobest_core::inference::NoiseScale;
use adobest_core::utility::UtilityKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "adobest", version, about = "Adaptive Bayesian frequency estimation under local differential privacy")]
pub struct Cli {
    /// Worker threads for replicate runs (overrides ADOBEST_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment configuration for several Monte Carlo runs.
    Simulate(SimulateArgs),
    /// Run every configuration of a JSON grid file.
    Grid(GridArgs),
    /// Print a mechanism's transition matrix and its privacy certificate.
    InspectMechanism(InspectArgs),
    /// Honest-response probability per subset size on geometric distributions.
    Fig2(Fig2Args),
    /// Run the invariant suite; exits 2 if any check fails.
    Validate(ValidateArgs),
}

fn parse_kappa(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("kappa must be in (0,1), got {v}"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a positive number, got {v}"))
    }
}

fn parse_unit_open(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must be in (0,1), got {v}"))
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must be in [0,1], got {v}"))
    }
}

fn parse_categories(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("`{s}` is not a whole number"))?;
    if v >= 2 {
        Ok(v)
    } else {
        Err(format!("need at least 2 categories, got {v}"))
    }
}

fn parse_utility(s: &str) -> Result<UtilityKind, String> {
    s.parse().map_err(|e: adobest_core::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Adaptive,
    SemiAdaptive,
    NonAdaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Sgld,
    Gibbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    PaperLiteral,
    SqrtGamma,
}

impl From<NoiseArg> for NoiseScale {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::PaperLiteral => NoiseScale::PaperLiteral,
            NoiseArg::SqrtGamma => NoiseScale::SqrtGamma,
        }
    }
}

/// Flags describing one experiment; ignored when `--config` is given.
#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Number of categories K.
    #[arg(long = "k", value_parser = parse_categories, required_unless_present = "config")]
    pub num_categories: Option<usize>,
    /// Total privacy budget.
    #[arg(long, value_parser = parse_positive, required_unless_present = "config")]
    pub epsilon: Option<f64>,
    /// Share of the budget spent inside the subset.
    #[arg(long, value_parser = parse_kappa, default_value_t = 0.9)]
    pub kappa: f64,
    /// Concentration of the Dirichlet the ground truth is drawn from.
    #[arg(long, value_parser = parse_positive, required_unless_present = "config")]
    pub rho: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Adaptive)]
    pub mode: ModeArg,
    /// Utility maximized in adaptive mode: fisher, entropy, tv-posterior,
    /// tv-marginal, mse or honest.
    #[arg(long, value_parser = parse_utility, default_value = "honest")]
    pub utility: UtilityKind,
    /// Mass threshold of the semi-adaptive rule.
    #[arg(long, value_parser = parse_unit_open, default_value_t = 0.8)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = SamplerArg::Sgld)]
    pub sampler: SamplerArg,
    /// Langevin updates per step.
    #[arg(long, default_value_t = 20)]
    pub updates: usize,
    #[arg(long, default_value_t = 50)]
    pub minibatch: usize,
    /// Step size at time t is this value over t.
    #[arg(long, value_parser = parse_positive, default_value_t = 0.5)]
    pub step_scale: f64,
    #[arg(long, value_enum, default_value_t = NoiseArg::PaperLiteral)]
    pub noise: NoiseArg,
    /// Gibbs sweeps per step.
    #[arg(long, default_value_t = 1)]
    pub gibbs_sweeps: usize,
    /// Iterations of the final averaging chain.
    #[arg(long, default_value_t = 2000)]
    pub final_iters: usize,
    #[arg(long, default_value_t = 1000)]
    pub final_burnin: usize,
    /// Shape of the symmetric Dirichlet prior.
    #[arg(long, value_parser = parse_positive, default_value_t = 1.0)]
    pub prior_shape: f64,
    /// Fraction of steps whose mechanism is re-certified.
    #[arg(long, value_parser = parse_fraction, default_value_t = 0.01)]
    pub audit_fraction: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// JSON experiment description; replaces the experiment flags.
    #[arg(long, conflicts_with_all = ["num_categories", "epsilon", "rho"])]
    pub config: Option<PathBuf>,
    /// Per-run CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON output.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    pub dump_config: bool,
    /// Leave the wall-time column empty so output is byte-reproducible.
    #[arg(long)]
    pub no_wall_time: bool,
    /// Per-step subset sizes and prefix utilities of run 0, as CSV.
    #[arg(long)]
    pub utility_log: Option<PathBuf>,
    /// Iterates of run 0's final averaging chain, as CSV.
    #[arg(long)]
    pub chain_trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// JSON file: an array of experiment descriptions, or `{"configs": [...]}`.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_wall_time: bool,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    #[arg(long = "k", value_parser = parse_categories)]
    pub num_categories: usize,
    #[arg(long, value_parser = parse_positive)]
    pub epsilon: f64,
    #[arg(long, value_parser = parse_kappa, default_value_t = 0.9)]
    pub kappa: f64,
    /// Use the subset {0, ..., size-1}.
    #[arg(long, default_value_t = 0, conflicts_with = "subset")]
    pub subset_size: usize,
    /// Explicit subset members, comma separated (zero-based).
    #[arg(long, value_delimiter = ',')]
    pub subset: Option<Vec<usize>>,
    /// Matrix CSV output; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Certificate JSON output.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Fig2Args {
    #[arg(long = "k", value_parser = parse_categories)]
    pub num_categories: usize,
    #[arg(long, value_parser = parse_positive)]
    pub epsilon: f64,
    #[arg(long, value_parser = parse_kappa, default_value_t = 0.9)]
    pub kappa: f64,
    /// Ratios between consecutive probabilities, comma separated, each > 1.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ratios: Vec<f64>,
    /// CSV output; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON output.
    #[arg(long)]
    pub report: Option<PathBuf>,
}
