use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(
    name = "rve",
    version,
    about = "Periodic Laguerre RVEs with prescribed grain volumes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate an RVE and write diagram, statistics and manifest files.
    Generate(GenerateArgs),
    /// Time damped Newton solves over sizes and volume distributions.
    Bench(BenchArgs),
    /// Log the step halvings of every Newton iteration over repeated runs.
    BacktrackStudy(BacktrackArgs),
    /// Run the built-in invariant and oracle checks.
    Validate(ValidateArgs),
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Dist {
    Sp,
    Dp,
    Lognormal,
    File,
}

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Obj,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Args, Debug, Clone)]
pub struct BoxArgs {
    #[arg(long, default_value_t = 1.0)]
    pub lx: f64,
    #[arg(long, default_value_t = 1.0)]
    pub ly: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lz: f64,
}

#[derive(Args, Debug, Clone)]
pub struct DistArgs {
    /// Volume ratio of large to small grains for `dp`.
    #[arg(long, default_value_t = laguerre_rve::rve::DEFAULT_DP_RATIO)]
    pub dp_ratio: f64,
    /// Scale of the underlying normal for `lognormal`.
    #[arg(long, default_value_t = laguerre_rve::rve::DEFAULT_LOGNORMAL_SIGMA)]
    pub sigma: f64,
    /// Location of the underlying normal; defaults to a mean volume of |V|/n.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Target volumes for `--dist file`, separated by whitespace or commas.
    #[arg(long)]
    pub targets_file: Option<PathBuf>,
    /// Seed positions, one `x y z` triple per line.
    #[arg(long)]
    pub seeds_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub lattice: BoxArgs,
    #[arg(long, value_enum, default_value_t = Dist::Sp)]
    pub dist: Dist,
    #[command(flatten)]
    pub dist_params: DistArgs,
    /// Stop once the largest percentage volume error is below this.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Number of Lloyd rounds.
    #[arg(long, default_value_t = 0)]
    pub lloyd: usize,
    /// Start each Newton solve from the previous round's weights.
    #[arg(long)]
    pub warm_start: bool,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Output path prefix.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output formats; defaults to json and csv. The manifest is always written.
    #[arg(long = "format", value_enum)]
    pub formats: Vec<Format>,
    /// Rerun the configuration recorded in a manifest.
    #[arg(long, conflicts_with_all = ["n", "dist", "targets_file", "seeds_file"])]
    pub from_manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_enum, default_value = "sp")]
    pub dists: Vec<Dist>,
    #[arg(long, default_value_t = 100)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    #[command(flatten)]
    pub lattice: BoxArgs,
    #[command(flatten)]
    pub dist_params: DistArgs,
    /// CSV destination; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BacktrackArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, value_enum, default_value_t = Dist::Lognormal)]
    pub dist: Dist,
    #[command(flatten)]
    pub dist_params: DistArgs,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    #[command(flatten)]
    pub lattice: BoxArgs,
    /// CSV destination; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long, value_enum, default_value_t = Level::Quick)]
    pub level: Level,
    /// Flip the sign of the Hessian off-diagonal in the derivative checks.
    #[arg(long, hide = true)]
    pub inject_hessian_sign_error: bool,
}
