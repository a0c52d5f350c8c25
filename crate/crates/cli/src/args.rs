use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "hetsim", version, about = "Similarity on heterogeneous information networks")]
pub struct Cli {
    /// Worker threads for solver sweeps (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Seed for every random stream: generators and randomized eigensolves.
    #[arg(long, global = true, env = "HETSIM_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the similarity matrices of a network bundle.
    Solve(SolveArgs),
    /// Generate a synthetic network bundle.
    Synth {
        #[command(subcommand)]
        kind: SynthKind,
    },
    /// Ordering quality Q of an estimate against ground truth, or an r-sweep.
    EvalQ(EvalQArgs),
    /// Top-k most similar entities to one entity.
    Query(QueryArgs),
    /// Render one similarity block as an SVG heatmap.
    Heatmap(HeatmapArgs),
    /// Check the convergence conditions of a bundle and its weights.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Dense,
    Lowrank,
    Lyapunov,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Dense => "dense",
            SolverKind::Lowrank => "lowrank",
            SolverKind::Lyapunov => "lyapunov",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    #[arg(long, value_enum, default_value_t = SolverKind::Dense)]
    pub solver: SolverKind,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long = "max-iter", default_value_t = 100)]
    pub max_iter: usize,
    /// Damping for the lyapunov solver.
    #[arg(long = "c", default_value_t = 0.8)]
    pub c: f64,
    /// lowrank only: `full`, one rank for all types, or `Type=k,...`.
    #[arg(long)]
    pub ranks: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub oversampling: usize,
    #[arg(long = "power-iters", default_value_t = 2)]
    pub power_iters: usize,
    /// Run even when the convergence conditions fail.
    #[arg(long = "skip-checks")]
    pub skip_checks: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// JSON list of weights; overrides any weights in the bundle schema.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Output directory for similarity.csv / factors.csv and trace.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// lowrank only: also write the expanded similarity.csv.
    #[arg(long = "dense-output")]
    pub dense_output: bool,
}

#[derive(Debug, Subcommand)]
pub enum SynthKind {
    /// K fully coupled types with sizes in [ceil(N/2), N].
    Random {
        #[arg(long = "K")]
        k: usize,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Points in the unit square, linked between adjacent layers within r.
    Layered {
        #[arg(long)]
        layers: usize,
        /// Points per layer, comma separated; one value is reused for all.
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<usize>,
        #[arg(long = "r")]
        r: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Catalog network of books, authors, years and publishers.
    Catalog {
        #[arg(long, default_value_t = 3625)]
        books: usize,
        #[arg(long, default_value_t = 99)]
        authors: usize,
        #[arg(long, default_value_t = 65)]
        years: usize,
        #[arg(long, default_value_t = 554)]
        publishers: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generator described by a TOML file with a `kind` key.
    FromFile {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct EvalQArgs {
    /// Point cloud CSV; ground truth is minus the Euclidean distance.
    #[arg(long, conflicts_with_all = ["truth", "sweep"])]
    pub points: Option<PathBuf>,
    /// Layer of --points to evaluate.
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    /// Ground-truth similarity CSV.
    #[arg(long, conflicts_with = "sweep")]
    pub truth: Option<PathBuf>,
    /// Estimated similarity CSV.
    #[arg(long, conflicts_with = "sweep")]
    pub estimate: Option<PathBuf>,
    /// Type to compare; defaults to `layer<k>` with --points, else the first
    /// type in --truth.
    #[arg(long = "type")]
    pub ty: Option<String>,
    /// Radius grid `r0:r1:step` for a layered-graph sweep.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Points per layer in the sweep.
    #[arg(long, value_delimiter = ',', default_value = "40,40,40")]
    pub counts: Vec<usize>,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Write one `r,trial,q` row per run here.
    #[arg(long = "per-trial")]
    pub per_trial: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Dense similarity CSV.
    #[arg(long, conflicts_with = "factors", required_unless_present = "factors")]
    pub similarity: Option<PathBuf>,
    /// Factors CSV from the lowrank solver.
    #[arg(long)]
    pub factors: Option<PathBuf>,
    #[arg(long = "type")]
    pub ty: String,
    #[arg(long)]
    pub id: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long, conflicts_with = "factors", required_unless_present = "factors")]
    pub similarity: Option<PathBuf>,
    #[arg(long)]
    pub factors: Option<PathBuf>,
    #[arg(long = "type")]
    pub ty: String,
    /// Reorder rows and columns to this bundle's entity file order.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Damping used for the lyapunov bound report.
    #[arg(long = "c", default_value_t = 0.8)]
    pub c: f64,
}
