use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

const PRECEDENCE: &str = "\
Settings resolve in this order: command-line flag, then the --config TOML
file (or the file named by GLIMPSE_CONFIG), then GLIMPSE_* environment
variables (GLIMPSE_ESTIMATOR, GLIMPSE_METHOD, GLIMPSE_TOP_K,
GLIMPSE_RANK_SIZE, GLIMPSE_THRESHOLD, GLIMPSE_SEED, GLIMPSE_JOBS,
GLIMPSE_PROVIDER_CONFIG, GLIMPSE_PROMPT_FILE), then built-in defaults.
The provider key comes from the provider file or GLIMPSE_API_KEY.

Exit codes: 0 ok, 1 configuration, 2 I/O or input format, 3 provider,
4 numerical or degenerate data. Failures print one line to stderr:
  error kind=<config|io|provider|numerical> code=<n> msg=\"...\"";

#[derive(Debug, Parser)]
#[command(name = "glimpse", version, about = "Zero-shot machine-text detection from top-K logprobs", after_help = PRECEDENCE)]
pub struct Cli {
    /// TOML file with default settings.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score texts through an echo-mode completion API and write a dump.
    Fetch(FetchArgs),
    /// Generate a synthetic dump with known true distributions.
    Synth(SynthArgs),
    /// Compute a detection metric for every passage of a dump.
    Score(ScoreArgs),
    /// Turn scores into human/machine verdicts with a threshold.
    Detect(DetectArgs),
    /// Write the evaluation report (AUROC, accuracy, TPR at fixed FPR).
    Eval(EvalArgs),
    /// Train the MLP tail estimator.
    TrainMlp(TrainArgs),
    /// Mean KL divergence of each estimator against known truths, per K.
    KlSweep(KlArgs),
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// naive | geometric | zipfian | mlp
    #[arg(long)]
    pub estimator: Option<String>,
    /// Observed top-K per position (observations are cut to this K).
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Rank-list size M of the completed distribution.
    #[arg(long)]
    pub rank_size: Option<usize>,
    /// MLP model file; repeat for several K.
    #[arg(long = "mlp-model", value_name = "FILE")]
    pub mlp_models: Vec<PathBuf>,
    /// Keep the raw Zipfian grid optimum instead of rescaling the tail to the exact mass.
    #[arg(long)]
    pub no_zipf_rescale: bool,
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    /// JSONL with {"id", "label"?, "text"} per line.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Dump to write (.gz compresses).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub provider_config: Option<PathBuf>,
    /// Prompt prepended to every passage; its positions are not scored.
    #[arg(long, value_name = "FILE")]
    pub prompt_file: Option<PathBuf>,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Concurrent requests.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write the passages that succeeded and exit 0 even if some failed.
    #[arg(long)]
    pub keep_going: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// geometric | zipfian | mixture
    #[arg(long)]
    pub family: Option<String>,
    /// Passages per class.
    #[arg(long)]
    pub passages: Option<usize>,
    /// Positions per passage.
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub machine_sharpness: Option<f64>,
    #[arg(long)]
    pub human_sharpness: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub rank_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Dump to score.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Scores JSONL; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// curvature | entropy | rank | logrank | likelihood
    #[arg(long)]
    pub method: Option<String>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Dataset tag for the report; defaults to the dump's file stem.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Source-model tag for the report; defaults to "unknown".
    #[arg(long)]
    pub source: Option<String>,
    /// Drop passages whose metric is undefined instead of failing.
    #[arg(long)]
    pub skip_degenerate: bool,
    /// Read a truncated dump up to its first bad line.
    #[arg(long)]
    pub salvage: bool,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Scores JSONL from `score`.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Metric above this value is called machine-generated.
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scores JSONL files; repeat to pool datasets or sources.
    #[arg(long = "in", value_name = "FILE", required = true)]
    pub inputs: Vec<PathBuf>,
    /// CSV report; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// per-dataset | cross-dataset | cross-source
    #[arg(long, default_value = "per-dataset")]
    pub protocol: String,
    /// Also write one ROC CSV per population into this directory.
    #[arg(long, value_name = "DIR")]
    pub roc_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Model file to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Dump whose true distributions are the teachers; synthetic teachers when omitted.
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Family of synthetic teachers.
    #[arg(long)]
    pub family: Option<String>,
    /// Number of synthetic teachers.
    #[arg(long)]
    pub examples: Option<usize>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub rank_size: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Abort on the first epoch whose loss goes up.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct KlArgs {
    /// Dump with true distributions.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Estimators to compare.
    #[arg(long, value_delimiter = ',', default_value = "naive,geometric,zipfian")]
    pub estimators: Vec<String>,
    /// Top-K values to sweep.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub ks: Vec<usize>,
    /// MLP model file; repeat for several K.
    #[arg(long = "mlp-model", value_name = "FILE")]
    pub mlp_models: Vec<PathBuf>,
}
