use std::path::PathBuf;

use asttrans_core::corpus::Split;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "asttrans",
    version,
    about = "AST-representation augmented code search pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the depth-k representation of every record.
    Extract(ExtractArgs),
    /// Write query-to-code-tokens and query-to-representation parallel files.
    BuildCorpora(BuildCorporaArgs),
    /// Dataset statistics as JSON.
    Stats(StatsArgs),
    /// Train the skip-gram token embedder.
    TrainEmbedder(TrainEmbedderArgs),
    /// Train a query translator on a parallel corpus.
    TrainTranslator(TrainTranslatorArgs),
    /// Translate dataset queries with a trained translator.
    Translate(TranslateArgs),
    /// Seeded random stand-ins for an external model's vectors.
    SynthVectors(SynthVectorsArgs),
    /// Rank candidates with original, augmented and combined similarity.
    Search(SearchArgs),
    /// Rerun search over a grid of depths or weights.
    Sweep(SweepArgs),
    /// Retrieval report (MRR and EffectMRR) over search runs.
    Eval(EvalArgs),
    /// CrystalBLEU-4 report comparing the two translation targets.
    Rq1(Rq1Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Paper,
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Weighted sum of the two similarity matrices.
    Matrix,
    /// Cosine over concatenated original and augmented vectors.
    Concat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Asttrans,
    #[value(name = "code_tokens")]
    CodeTokens,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Depth,
    Weight,
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse()
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DatasetArgs {
    /// JSONL dataset (id, query, code, lang, split).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Skip malformed records instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, default_value_t = 5)]
    pub depth: usize,
    /// Only records of this split.
    #[arg(long, value_parser = parse_split)]
    pub split: Option<Split>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BuildCorporaArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, default_value_t = 5)]
    pub depth: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StatsArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, default_value_t = 5)]
    pub depth: usize,
    /// JSON output file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainEmbedderArgs {
    /// Token files, one sequence per line (`id<TAB>tokens` lines are accepted).
    #[arg(long = "corpus", required = true)]
    pub corpora: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Profile::Paper)]
    pub profile: Profile,
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training shards; results depend on this value.
    #[arg(long)]
    pub shards: Option<usize>,
    /// Binary model output.
    #[arg(long)]
    pub out: PathBuf,
    /// Also export vectors in the text format.
    #[arg(long)]
    pub export_text: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainTranslatorArgs {
    /// Directory written by build-corpora.
    #[arg(long)]
    pub corpus_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Target::Asttrans)]
    pub target: Target,
    #[arg(long, value_enum, default_value_t = Profile::Paper)]
    pub profile: Profile,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub validate_every: Option<usize>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Beam width for decoding (greedy when omitted).
    #[arg(long)]
    pub beam: Option<usize>,
    /// Write scheduled checkpoints here.
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Final (best-validation) model.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TranslateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, value_parser = parse_split, default_value = "test")]
    pub split: Split,
    /// `id<TAB>tokens` per query.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthVectorsArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, default_value_t = 768)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scale of the query-side perturbation; 0 makes each query equal its code.
    #[arg(long, default_value_t = 20.0)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Inputs shared by `search` and `sweep`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SearchInputs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Split whose queries and candidates form the search pool.
    #[arg(long, value_parser = parse_split, default_value = "test")]
    pub split: Split,
    /// Vector file with `q:<id>` and `c:<id>` rows.
    #[arg(long)]
    pub original_vectors: PathBuf,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub augmented: Switch,
    /// Translated queries (`id<TAB>tokens`); `{k}` is replaced by the depth.
    #[arg(long, required_if_eq("augmented", "on"))]
    pub translations: Option<String>,
    /// Embedder model; `{k}` is replaced by the depth.
    #[arg(long, required_if_eq("augmented", "on"))]
    pub embedder: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub depth: usize,
    /// Reduce the original vectors to this many principal components.
    #[arg(long)]
    pub pca_dim: Option<usize>,
    #[arg(long, value_enum, default_value_t = Strategy::Matrix)]
    pub strategy: Strategy,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SearchArgs {
    #[command(flatten)]
    pub inputs: SearchInputs,
    #[arg(long, default_value_t = 0.1)]
    pub w: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub inputs: SearchInputs,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma list (`0.1,0.2`) or inclusive range (`2..9`, `0.1..0.4:0.1`).
    #[arg(long)]
    pub range: String,
    /// Weight used while sweeping depth.
    #[arg(long, default_value_t = 0.1)]
    pub w: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// `model:dim:search_dir`, e.g. `gcb:768:runs/gcb768`. Repeatable.
    #[arg(long = "run", required = true)]
    pub runs: Vec<String>,
    #[arg(long, default_value = "desk")]
    pub dataset_name: String,
    /// TSV report.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Rq1Args {
    #[arg(long)]
    pub corpus_dir: PathBuf,
    #[arg(long)]
    pub asttrans_model: PathBuf,
    #[arg(long)]
    pub code_tokens_model: PathBuf,
    #[arg(long, value_parser = parse_split, default_value = "test")]
    pub split: Split,
    #[arg(long, default_value_t = asttrans_core::metrics::DEFAULT_TRIVIALLY_SHARED)]
    pub trivially_shared: usize,
    #[arg(long, default_value = "desk")]
    pub dataset_name: String,
    #[arg(long)]
    pub out: PathBuf,
}
