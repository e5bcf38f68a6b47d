use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "operc", version, about = "Exact checks and simulation for anisotropic oriented percolation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Worker thread cap.
    #[arg(long, env = "OPERC_THREADS", global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    MachineRecord,
}

/// Vectors are given inline (`0.1,0.2,0.7`, `20x0.1`, `1/2,1/2`) or as
/// `@path` to a file holding the same syntax.
pub type VectorArg = String;

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Truncated collision series λ(q) with its certified tail, and the
    /// packed-vector bound for m.
    Lambda(LambdaArgs),
    /// First-meeting distribution ℚ(τ = m) for m ≤ M.
    Tau(TauArgs),
    /// Collision probabilities c_n(q) and the two-block projection check.
    Collide(CollideArgs),
    /// Exact path-pair sums a_n, b_n, second moments and the partition identity.
    Enumerate(EnumerateArgs),
    /// The packing map on capped probability vectors.
    Pack(PackArgs),
    /// Percolation certificates.
    Check(CheckArgs),
    /// Monte Carlo cluster growth.
    Simulate(SimulateArgs),
    /// Runs the full acceptance suite.
    VerifyAll(VerifyAllArgs),
}

#[derive(Debug, Args)]
pub struct LambdaArgs {
    /// Step law q (a probability vector).
    #[arg(long)]
    pub q: VectorArg,
    /// Cap parameter m for the tail certificate.
    #[arg(long)]
    pub m: usize,
    /// Truncation N.
    #[arg(long = "N", default_value_t = 500)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct TauArgs {
    #[arg(long)]
    pub q: VectorArg,
    /// Truncation M.
    #[arg(long = "M", default_value_t = 50)]
    pub m: usize,
}

#[derive(Debug, Args)]
pub struct CollideArgs {
    #[arg(long)]
    pub q: VectorArg,
    /// Largest step N.
    #[arg(long = "N", default_value_t = 30)]
    pub n: usize,
    /// Also compare both sides of the projection identity (d ≥ 3).
    #[arg(long)]
    pub projection: bool,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    /// Edge probabilities p.
    #[arg(long)]
    pub p: VectorArg,
    /// Deepest level n tabulated.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Check the partition identity at level M.
    #[arg(long)]
    pub identity: bool,
    /// Identity level M (also raises n to M).
    #[arg(long = "M")]
    pub m: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PackArgs {
    #[arg(long)]
    pub q: VectorArg,
    #[arg(long)]
    pub m: usize,
    /// Apply a single step instead of the full orbit.
    #[arg(long, conflicts_with = "verify")]
    pub step: bool,
    /// Verify monotonicity of one step for n ≤ N.
    #[arg(long, value_name = "N")]
    pub verify: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Edge probabilities p.
    #[arg(long, required_unless_present = "isotropic")]
    pub p: Option<VectorArg>,
    /// ε for the explicit conditions; defaults to μ − 1.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Run the numeric λ route with this m.
    #[arg(long)]
    pub m: Option<usize>,
    /// Truncation for the numeric route.
    #[arg(long = "N", default_value_t = 500)]
    pub n: usize,
    /// Report the isotropic bound 1/d + 10/d².
    #[arg(long, value_name = "D")]
    pub isotropic: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub p: VectorArg,
    /// Horizon N.
    #[arg(long = "N")]
    pub n: usize,
    /// Replica count R.
    #[arg(long = "R", default_value_t = 1000)]
    pub replicas: usize,
    #[arg(long)]
    pub seed: u64,
    /// Track open-path counts and estimate W_n.
    #[arg(long)]
    pub counts: bool,
    /// Deepest level with tracked counts.
    #[arg(long, default_value_t = operc_core::sim::DEFAULT_COUNT_LEVELS)]
    pub count_levels: usize,
    /// Per-replica memory cap in MiB.
    #[arg(long, default_value_t = 2048)]
    pub memory_cap_mib: u64,
    /// Prune occupancy frontiers above this size.
    #[arg(long, default_value_t = operc_core::sim::DEFAULT_PRUNE_CAP, conflicts_with = "no_prune")]
    pub prune_cap: usize,
    #[arg(long)]
    pub no_prune: bool,
    /// Write run metadata (config hash, wall time) as JSON here.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyAllArgs {
    /// Run only criteria whose id starts with one of these.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
}
