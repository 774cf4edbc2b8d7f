use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "mvembed",
    version,
    about = "Multi-view reconstructive embedding and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic multi-view dataset.
    Synth(SynthArgs),
    /// Fit the multi-view embedding.
    Fit(FitArgs),
    /// Run a single-view or concatenated baseline.
    Baseline(BaselineArgs),
    /// Evaluate an embedding.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Fit and evaluate over a grid of r, k and d.
    Sweep(SweepArgs),
    /// Export the convergence trace of a fit result.
    Trace(TraceArgs),
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Repeated random-split 1NN classification.
    Knn(KnnArgs),
    /// L1 retrieval precision, recall, MAP and F1.
    Retrieval(RetrievalArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Feature noise standard deviation.
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    /// Dimension of each view, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "25,25")]
    pub dims: Vec<usize>,
    /// Give every view both latent axes instead of alternating single axes.
    #[arg(long)]
    pub full_views: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// CSV files start with a header line.
    #[arg(long)]
    pub header: bool,
    /// Z-score every feature before embedding.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EmbedArgs {
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Gram ridge; defaults to 1e-3 when k exceeds the view dimension, else 1e-12.
    #[arg(long)]
    pub reg_eps: Option<f64>,
    /// Keep the bottom (near-constant) eigenvector.
    #[arg(long)]
    pub keep_trivial: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub embed: EmbedArgs,
    #[arg(long, default_value_t = 5.0)]
    pub r: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Recorded in meta.json; fitting itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Heat,
    Binary,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BaselineArgs {
    /// slle, fclle, sle or fcle.
    #[arg(long)]
    pub kind: String,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub embed: EmbedArgs,
    /// Edge weights for the Laplacian baselines.
    #[arg(long, value_enum, default_value_t = Weighting::Heat)]
    pub weighting: Weighting,
    /// Heat-kernel width; defaults to the median neighbor distance.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KnnArgs {
    /// Embedding CSV, one sample per row.
    #[arg(long)]
    pub embedding: PathBuf,
    /// Label CSV, one integer per row.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub header: bool,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
    /// Split each class separately.
    #[arg(long)]
    pub stratified: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report directory; the summary is always printed to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RetrievalArgs {
    #[arg(long)]
    pub embedding: PathBuf,
    /// Query file: `{"queries": [{"query": 0, "relevant": [1, 2]}], "top_k": 2}`.
    #[arg(long, conflicts_with = "labels")]
    pub queries: Option<PathBuf>,
    /// Build queries from labels instead: every class member is relevant.
    #[arg(long, required_unless_present = "queries")]
    pub labels: Option<PathBuf>,
    /// Queries drawn per class when building them from labels.
    #[arg(long, default_value_t = 5)]
    pub per_class: usize,
    #[arg(long)]
    pub header: bool,
    #[arg(long, default_value_t = 2)]
    pub top_k: usize,
    /// Also export precision/recall/F1 at these cutoffs.
    #[arg(long, value_delimiter = ',')]
    pub curve_k: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long = "r", value_delimiter = ',', default_value = "5")]
    pub r_grid: Vec<f64>,
    #[arg(long = "k", value_delimiter = ',', default_value = "10")]
    pub k_grid: Vec<usize>,
    #[arg(long = "d", value_delimiter = ',', default_value = "10")]
    pub d_grid: Vec<usize>,
    #[arg(long)]
    pub reg_eps: Option<f64>,
    #[arg(long)]
    pub keep_trivial: bool,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TraceArgs {
    /// Output directory of a previous `fit`.
    #[arg(long)]
    pub result: PathBuf,
    /// Defaults to `<result>/trace.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add per-iteration wall-clock seconds (not reproducible across runs).
    #[arg(long)]
    pub with_timing: bool,
}
