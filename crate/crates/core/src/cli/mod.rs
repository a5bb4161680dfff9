mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::run;

/// Intersection-size estimation from max-hash and HyperLogLog sketches.
#[derive(Debug, Parser)]
#[command(name = "intersketch", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a sketch from newline-delimited tokens.
    Sketch(SketchArgs),
    /// Merge sketches of the same kind, seed and size into the sketch of the union.
    Merge(MergeArgs),
    /// Estimate the intersection size of two sketched sets.
    Estimate(EstimateArgs),
    /// Print the predicted variances at a parameter point.
    Theory(TheoryArgs),
    /// Run a Monte-Carlo sweep and write the results table.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Max,
    Hll,
}

#[derive(Debug, Args)]
pub struct SketchArgs {
    /// Token file, one element per line; `-` or absent reads standard input.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Kind::Max)]
    pub kind: Kind,
    /// Hash functions (max) or registers (hll, power of two).
    #[arg(long, default_value_t = 1024)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    S1,
    S2,
    S3,
    Ml,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Maxsketch,
    Hll,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Sketch of the first set (max-sketch or hll).
    #[arg(long)]
    pub a: PathBuf,
    /// Sketch of the second set, of the same kind.
    #[arg(long)]
    pub b: PathBuf,
    /// HLL sketch of the first set, used for the cardinalities when given.
    #[arg(long)]
    pub hll_a: Option<PathBuf>,
    #[arg(long)]
    pub hll_b: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SchemeArg::All)]
    pub scheme: SchemeArg,
    /// Starting cardinalities of the ML iteration.
    #[arg(long, value_enum, default_value_t = InitArg::Maxsketch)]
    pub init: InitArg,
    #[arg(long, default_value_t = 3)]
    pub max_iterations: u32,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    /// Intersection size.
    #[arg(long)]
    pub n: f64,
    #[arg(long)]
    pub m: usize,
    /// Emit rows in the results-table schema instead of text.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Hashed,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Maxsketch,
    Hll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepScheme {
    S1,
    S2,
    S3,
    Ml,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Size of the first set [default: 10000].
    #[arg(long)]
    pub a: Option<u64>,
    /// Size ratios |B|/|A| [default: 1,5,10].
    #[arg(long, value_delimiter = ',')]
    pub f: Vec<f64>,
    /// Overlap fractions |A∩B|/|A| [default: 0.05 to 0.95 by 0.05].
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    /// Evenly spaced overlap fractions from 0 to 1; overrides --alpha.
    #[arg(long, conflicts_with = "alpha")]
    pub alpha_step: Option<f64>,
    /// Sketch sizes [default: 256,1024].
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
    /// Trials per grid point [default: 2000].
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub schemes: Vec<SweepScheme>,
    #[arg(long, value_enum, default_value_t = InitArg::Maxsketch)]
    pub init: InitArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Hashed)]
    pub mode: ModeArg,
    /// Sketch feeding the cardinalities of schemes 1 to 3.
    #[arg(long, value_enum, default_value_t = SourceArg::Maxsketch)]
    pub cardinality_source: SourceArg,
    /// Worker threads; 0 lets the runtime decide.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, default_value_t = 3)]
    pub max_iterations: u32,
    /// Full-size grid: a = 10^6, 10^4 trials, alpha step 0.01, m in {100,500,1000,10000}.
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long)]
    pub out: PathBuf,
}
