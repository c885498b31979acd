use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Environment variable naming the default model directory.
pub const MODEL_DIR_ENV: &str = "CPRDRAFT_MODEL_DIR";
/// Environment variable for the default `serve` bind address.
pub const BIND_ENV: &str = "CPRDRAFT_BIND";

#[derive(Debug, Parser)]
#[command(name = "cprdraft", version, about = "Contextual preference ranking for card drafts")]
#[command(args_override_self = true)]
pub struct Cli {
    /// TOML file with per-command defaults; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic draft logs from an oracle drafter.
    Gen(GenArgs),
    /// Train an embedding model on draft logs.
    Train(TrainArgs),
    /// Score agents against the recorded picks of a log partition.
    Evaluate(EvaluateArgs),
    /// Rank all cards by distance to the empty pool.
    Rank(RankArgs),
    /// Run drafts between a mix of agents.
    Simulate(SimulateArgs),
    /// Train one model per embedding dimension and seed.
    Sweep(SweepArgs),
    /// Serve the recommendation API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelDirArgs {
    /// Directory for models when no explicit path is given.
    #[arg(long, env = MODEL_DIR_ENV, default_value = "models")]
    pub model_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DbArgs {
    /// Card database CSV.
    #[arg(long, value_name = "CSV")]
    pub cards: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SplitArgs {
    /// Fraction of drafts in the training partition.
    #[arg(long, default_value_t = 0.8)]
    pub split_ratio: f64,
    /// Seed of the draft-id hash that assigns partitions.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Draft-log file.
    #[arg(long, value_name = "FILE")]
    pub log: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Number of shards the drafts are hashed into.
    #[arg(long, default_value_t = 20)]
    pub shards: usize,
    /// Train on shards 0..budget only (default: all).
    #[arg(long)]
    pub shard_budget: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NetArgs {
    /// Embedding dimension D.
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1.0)]
    pub margin: f64,
    /// Streaming shuffle buffer size; 0 keeps stream order.
    #[arg(long, default_value_t = 10_000)]
    pub shuffle_buffer: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenArgs {
    /// Existing card database.
    #[arg(long, value_name = "CSV", conflicts_with = "synthetic_cards", required_unless_present = "synthetic_cards")]
    pub cards: Option<PathBuf>,
    /// Build a synthetic set of this many cards instead.
    #[arg(long)]
    pub synthetic_cards: Option<usize>,
    /// Where to write the synthetic card set (default: next to --out).
    #[arg(long, value_name = "CSV")]
    pub cards_out: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub drafts: u64,
    /// Gumbel noise scale of the oracle's picks.
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    /// Scale of the oracle's color-synergy weights.
    #[arg(long, default_value_t = 1.0)]
    pub synergy: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output draft-log file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub db: DbArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub net: NetArgs,
    /// Validation cadence in triplets; 0 disables.
    #[arg(long, default_value_t = 50_000)]
    pub validation_every: usize,
    /// Test-partition events used for validation.
    #[arg(long, default_value_t = 2_000)]
    pub validation_events: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model_dir: ModelDirArgs,
    /// Output model file (default: <model-dir>/model.cpr).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub db: DbArgs,
    /// Draft-log file.
    #[arg(long, value_name = "FILE")]
    pub log: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Evaluate this partition.
    #[arg(long, default_value = "test", value_parser = ["train", "test", "all"])]
    pub partition: String,
    /// Agents: random, raredraft, oracle, nnet, siamese.
    #[arg(long = "agent", value_delimiter = ',', default_value = "siamese")]
    pub agents: Vec<String>,
    /// Model file for the siamese agent (default: <model-dir>/model.cpr).
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub model_dir: ModelDirArgs,
    /// Oracle sidecar written by `gen` (default: <log>.oracle.json).
    #[arg(long, value_name = "FILE")]
    pub oracle: Option<PathBuf>,
    /// Hidden widths of the nnet baseline, trained on the train partition.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub nnet_hidden: Vec<usize>,
    #[arg(long, default_value_t = 1e-3)]
    pub nnet_lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for report files.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RankArgs {
    #[command(flatten)]
    pub db: DbArgs,
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub model_dir: ModelDirArgs,
    /// Draft log for first-pick rates in the report footer.
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
    /// Ranking file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Also export per-card embeddings as CSV.
    #[arg(long, value_name = "CSV")]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub db: DbArgs,
    /// Seat mix as name:count pairs, e.g. random:4,raredraft:2,siamese:2.
    #[arg(long, default_value = "random:8")]
    pub agents: String,
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub model_dir: ModelDirArgs,
    /// Oracle sidecar for oracle seats.
    #[arg(long, value_name = "FILE")]
    pub oracle: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub drafts: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub db: DbArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long, value_delimiter = ',', default_value = "2,8,32")]
    pub dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    /// Output table (CSV).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ServeArgs {
    #[command(flatten)]
    pub db: DbArgs,
    /// Models to load as [ID=]PATH; the id defaults to the file stem.
    #[arg(long = "model", value_name = "[ID=]FILE")]
    pub models: Vec<String>,
    #[command(flatten)]
    pub model_dir: ModelDirArgs,
    #[arg(long, env = BIND_ENV, default_value = "127.0.0.1:8080")]
    pub bind: String,
    /// Append-only session journal, replayed at startup.
    #[arg(long, value_name = "FILE")]
    pub journal: Option<PathBuf>,
    /// Static files served under / (the web UI bundle).
    #[arg(long, value_name = "DIR")]
    pub static_dir: Option<PathBuf>,
}
