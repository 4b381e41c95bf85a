use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "threshrecon",
    version,
    about = "Point-cloud reconstruction by distance-weighted threshold dynamics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic point cloud as CSV.
    Generate(GenerateArgs),
    /// Sample the distance to a cloud on a grid.
    Distance(DistanceArgs),
    /// Reconstruct a curve or surface from a cloud.
    Reconstruct(ReconstructArgs),
    /// Extract an isocontour from a field dump.
    Extract(ExtractArgs),
    /// Run one of the experiment suites.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Generator {
    FiveFold,
    ThreeFold,
    MFold,
    Torus,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    pub generator: Generator,
    /// Number of points.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Petal count for `m-fold`.
    #[arg(long, default_value_t = 5)]
    pub m: u32,
    /// Seed for the torus sampler and for noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of added Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// File name of the cloud inside `--out`.
    #[arg(long, default_value = "cloud.csv")]
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistChoice {
    Auto,
    Brute,
    Sweep,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Cloud CSV (2 or 3 columns).
    #[arg(long)]
    pub cloud: PathBuf,
    /// Nodes per axis.
    #[arg(long, default_value_t = 128)]
    pub grid: usize,
    /// Half-width of the periodic box.
    #[arg(long, default_value_t = std::f64::consts::PI)]
    pub extent: f64,
    #[arg(long, value_enum, default_value_t = DistChoice::Auto)]
    pub dist: DistChoice,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Also write the field as CSV.
    #[arg(long)]
    pub csv: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitChoice {
    Ball,
    Box,
    Levelset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IsoChoice {
    Raw,
    Mollified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelChoice {
    Sampled,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Reference {
    FiveFold,
    ThreeFold,
    MFold,
    Torus,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// 1 = symmetric weights, 2 = factored weights.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub alg: u8,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Fixed time step; implies a single stage.
    #[arg(long, conflicts_with = "schedule")]
    pub tau: Option<f64>,
    /// `first:count` (halving) or an explicit comma list. Default `0.02:4`.
    #[arg(long)]
    pub schedule: Option<String>,
    /// Single stage at `--tau` (default 0.0025).
    #[arg(long, conflicts_with = "schedule")]
    pub no_adaptive: bool,
    #[arg(long, value_enum)]
    pub init: Option<InitChoice>,
    /// Ball radius.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Box half-widths, comma separated.
    #[arg(long = "box")]
    pub box_half_widths: Option<String>,
    /// Level-set offset for `--init levelset` (default 4h).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Skip per-iteration energy evaluation.
    #[arg(long)]
    pub no_energy_log: bool,
    #[arg(long, value_enum, default_value_t = IsoChoice::Mollified)]
    pub iso_source: IsoChoice,
    #[arg(long, value_enum, default_value_t = KernelChoice::Sampled)]
    pub kernel: KernelChoice,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Analytic curve or surface to measure the result against.
    #[arg(long, value_enum)]
    pub reference: Option<Reference>,
    /// Petal count for `--reference m-fold`.
    #[arg(long, default_value_t = 5)]
    pub m: u32,
    /// Recorded in the manifest; the reconstruction itself is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Scalar or indicator dump.
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub iso: f64,
    /// Convolve with the heat kernel at this τ before extracting.
    #[arg(long)]
    pub mollify: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    MfoldRuntime,
    EnergyDecay,
    PSweep,
    NoiseSweep,
    ResolutionSweep,
    #[value(name = "torus-3d")]
    Torus3d,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub suite: Suite,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Override the suite's τ schedule.
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long, default_value = "bench")]
    pub out: PathBuf,
}
