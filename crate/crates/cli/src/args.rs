use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "mmshap", version, about = "Shapley attribution for multiple-choice video QA")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for permutation sampling and answer replacement.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Coalition evaluation budget per tuple.
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    /// exec:<cmd> | http://<url> | synthetic:<kind>[:<seed>] | synthetic:<file.json>
    #[arg(long, global = true)]
    pub adapter: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Adapter handshake and request deadline, in seconds.
    #[arg(long, global = true, default_value_t = 30.0)]
    pub timeout: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute per-tuple attributions.
    Attribute(AttributeArgs),
    /// Modality Contribution and Per-Feature Contribution tables.
    Metrics(MetricsArgs),
    /// Masking accuracy experiments, optionally on a replaced dataset.
    Experiment(ExperimentArgs),
    /// Write a dataset with replaced or injected negatives.
    ReplaceAnswers(ReplaceArgs),
    /// Estimator error against a reference at several budgets.
    AblateIterations(AblateArgs),
    /// Attribution heatmap matrix, raster and per-modality value dump.
    Heatmap(HeatmapArgs),
    /// Word frequency and mean attribution table.
    WordReport(WordReportArgs),
    /// Spearman correlation between external frame rankings and attributions.
    RankCorr(RankCorrArgs),
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Enumerate every coalition instead of sampling.
    #[arg(long)]
    pub exact: bool,
    /// Recompute results that already exist.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub no_antithetic: bool,
    #[arg(long)]
    pub no_cache: bool,
    /// Only these tuple ids (repeatable).
    #[arg(long = "tuple")]
    pub tuples: Vec<String>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory of attribution files; defaults to <out>/attributions.
    #[arg(long)]
    pub attributions: Option<PathBuf>,
    /// gt, false, or both.
    #[arg(long, default_value = "gt")]
    pub basis: String,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON experiment manifest; command-line flags fill unset fields.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// none|all|video|question|answer|neg:<class>|pos:<class> (repeatable).
    #[arg(long = "mask")]
    pub masks: Vec<String>,
    /// Sign masks never mask answers of non-ground-truth choices.
    #[arg(long)]
    pub protect_distractors: bool,
    #[arg(long)]
    pub attributions: Option<PathBuf>,
    /// easy | new-<x>
    #[arg(long)]
    pub replace: Option<String>,
    #[arg(long)]
    pub type_compat: bool,
}

#[derive(Debug, Args)]
pub struct ReplaceArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// easy | new-<x>
    #[arg(long)]
    pub mode: String,
    #[arg(long)]
    pub type_compat: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Tuple to study; defaults to the first.
    #[arg(long)]
    pub tuple: Option<String>,
    /// Comma-separated evaluation budgets.
    #[arg(long, value_delimiter = ',', default_values_t = vec![100usize, 500, 1000, 2500, 5000])]
    pub grid: Vec<usize>,
    /// `exact` or a reference budget.
    #[arg(long, default_value = "10000")]
    pub reference: String,
    /// Number of seeds, starting at --seed.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// Sample unpaired walks; paired walks are exact on pairwise models.
    #[arg(long)]
    pub no_antithetic: bool,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub attributions: Option<PathBuf>,
    #[arg(long, default_value_t = mmshap_core::report::HEATMAP_COLUMNS)]
    pub truncate_to: usize,
    /// Pixel size of one heatmap cell.
    #[arg(long, default_value_t = 4)]
    pub cell: u32,
}

#[derive(Debug, Args)]
pub struct WordReportArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub attributions: Option<PathBuf>,
    /// Average raw values instead of per-tuple normalized ones.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct RankCorrArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub attributions: Option<PathBuf>,
    /// JSON object mapping tuple_id to a frame ranking (best first).
    #[arg(long)]
    pub rankings: PathBuf,
}
