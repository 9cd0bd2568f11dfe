use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Serialize;
use simile_core::metrics::CostKind;
use simile_core::Error;

mod commands;
mod output;

#[derive(Debug, Parser, Serialize)]
#[command(name = "simile", version, about = "SimiLe metric, risk training and analysis tools")]
struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Directory receiving outputs and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Learn BPE merges from a corpus.
    LearnBpe(LearnBpeArgs),
    /// Segment (or detokenize) a corpus with a BPE model.
    Segment(SegmentArgs),
    /// Train SIM embeddings on paraphrase pairs.
    TrainSim(TrainSimArgs),
    /// Per-sentence and corpus BLEU, SIM and SimiLe.
    Score(ScoreArgs),
    /// Keep paraphrase pairs that are similar but lexically different.
    FilterPairs(FilterPairsArgs),
    /// Label-smoothed MLE training of the lexical model.
    MleTrain(MleTrainArgs),
    /// Minimum-risk fine-tuning.
    RiskTrain(RiskTrainArgs),
    /// Risk fine-tuning once per n-best size.
    SweepNbest(SweepArgs),
    /// Histogram of n-best candidate costs.
    AnalyzeHist(HistArgs),
    /// Pairwise score diversity within n-best lists.
    AnalyzePairs(PairsArgs),
    /// Lexical F1 by frequency or tag bucket.
    AnalyzeF1(F1Args),
    /// Rank sentences by BLEU/SIM disagreement between two systems.
    CompareMetrics(CompareArgs),
    /// Correlate a metric with human judgments.
    Correlate(CorrelateArgs),
    /// Paired bootstrap significance test.
    Bootstrap(BootstrapArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::LearnBpe(_) => "learn-bpe",
            Command::Segment(_) => "segment",
            Command::TrainSim(_) => "train-sim",
            Command::Score(_) => "score",
            Command::FilterPairs(_) => "filter-pairs",
            Command::MleTrain(_) => "mle-train",
            Command::RiskTrain(_) => "risk-train",
            Command::SweepNbest(_) => "sweep-nbest",
            Command::AnalyzeHist(_) => "analyze-hist",
            Command::AnalyzePairs(_) => "analyze-pairs",
            Command::AnalyzeF1(_) => "analyze-f1",
            Command::CompareMetrics(_) => "compare-metrics",
            Command::Correlate(_) => "correlate",
            Command::Bootstrap(_) => "bootstrap",
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct LearnBpeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Target vocabulary size (base symbols plus merges).
    #[arg(long, default_value_t = simile_core::subword::DEFAULT_VOCAB_SIZE)]
    vocab_size: usize,
}

#[derive(Debug, Args, Serialize)]
struct SegmentArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Join subwords back into words instead of segmenting.
    #[arg(long)]
    detokenize: bool,
}

/// Metric inputs shared by every command that computes SIM.
#[derive(Debug, Args, Serialize)]
struct MetricArgs {
    /// Embedding file.
    #[arg(long)]
    emb: PathBuf,
    /// BPE model applied before embedding lookup.
    #[arg(long)]
    bpe: Option<PathBuf>,
    #[arg(long, default_value_t = simile_core::metrics::DEFAULT_ALPHA)]
    alpha: f64,
    /// Count the length penalty in subwords instead of words.
    #[arg(long)]
    subword_lengths: bool,
}

#[derive(Debug, Args, Serialize)]
struct TrainSimArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    bpe: Option<PathBuf>,
    /// Start from this embedding file instead of a random table.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, default_value_t = simile_core::simembed::DEFAULT_DIM)]
    dim: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = simile_core::simembed::DEFAULT_MARGIN)]
    margin: f64,
    #[arg(long, default_value_t = 64)]
    minibatch: usize,
    /// Mini-batches per mega-batch.
    #[arg(long, default_value_t = 4)]
    megabatch: usize,
    #[arg(long)]
    bidirectional: bool,
}

#[derive(Debug, Args, Serialize)]
struct ScoreArgs {
    #[arg(long)]
    refs: PathBuf,
    #[arg(long)]
    hyps: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    /// Report scores multiplied by 100.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    scale_hundred: bool,
}

#[derive(Debug, Args, Serialize)]
struct FilterPairsArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long, default_value_t = 0.5)]
    sim_min: f64,
    #[arg(long, default_value_t = 0.2)]
    trigram_max: f64,
}

#[derive(Debug, Args, Serialize)]
struct CorpusArgs {
    #[arg(long)]
    train_src: PathBuf,
    #[arg(long)]
    train_ref: PathBuf,
    #[arg(long)]
    valid_src: PathBuf,
    #[arg(long)]
    valid_ref: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct OptimArgs {
    #[arg(long, default_value_t = 0.25)]
    lr: f64,
    #[arg(long, default_value_t = 0.99)]
    momentum: f64,
    /// Global gradient-norm clipping threshold (0 disables).
    #[arg(long, default_value_t = 0.1)]
    clip: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    /// Label-smoothing mass.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Skip the annealed epochs after the constant-rate phase.
    #[arg(long)]
    no_anneal: bool,
}

#[derive(Debug, Args, Serialize)]
struct MleTrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Continue from this model instead of a zero-initialized one.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[command(flatten)]
    optim: OptimArgs,
}

#[derive(Debug, Args, Serialize)]
struct RiskArgs {
    /// Pre-trained model (JSON).
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long, default_value_t = 0.3)]
    gamma: f64,
    #[arg(long, default_value_t = CostKind::SimileCost, value_parser = parse_cost)]
    cost: CostKind,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[command(flatten)]
    optim: OptimArgs,
}

#[derive(Debug, Args, Serialize)]
struct RiskTrainArgs {
    #[command(flatten)]
    risk: RiskArgs,
    /// n-best list size.
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Try every gamma in {0.2, 0.3, 0.4} and keep the best run.
    #[arg(long)]
    tune_gamma: bool,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    risk: RiskArgs,
    /// Comma-separated n-best sizes.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    k: Vec<usize>,
}

#[derive(Debug, Args, Serialize)]
struct NbestInput {
    /// n-best file ("index ||| hypothesis ||| logprob").
    #[arg(long)]
    nbest: PathBuf,
    #[arg(long)]
    refs: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
}

#[derive(Debug, Args, Serialize)]
struct HistArgs {
    #[command(flatten)]
    input: NbestInput,
    #[arg(long, default_value_t = CostKind::SimileCost, value_parser = parse_cost)]
    cost: CostKind,
    #[arg(long, default_value_t = simile_core::analysis::DEFAULT_BIN_WIDTH)]
    bin_width: f64,
}

#[derive(Debug, Args, Serialize)]
struct PairsArgs {
    #[command(flatten)]
    input: NbestInput,
}

#[derive(Debug, Args, Serialize)]
struct F1Args {
    /// Reference file; repeat once per corpus.
    #[arg(long, required = true)]
    refs: Vec<PathBuf>,
    /// System output aligned with each --refs.
    #[arg(long, required = true)]
    hyps: Vec<PathBuf>,
    /// Second system; when given, per-bucket deltas are reported.
    #[arg(long)]
    hyps_b: Vec<PathBuf>,
    /// "token<TAB>tag" file; buckets by tag instead of frequency.
    #[arg(long)]
    tags: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct CompareArgs {
    #[arg(long)]
    refs: PathBuf,
    #[arg(long)]
    hyps_a: PathBuf,
    #[arg(long)]
    hyps_b: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    /// Number of entries flagged at each end of the ranking.
    #[arg(long, default_value_t = 10)]
    extremes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MetricName {
    Bleu,
    Sim,
    Simile,
}

#[derive(Debug, Args, Serialize)]
struct CorrelateArgs {
    /// TSV "reference<TAB>hypothesis<TAB>human_score".
    #[arg(long)]
    judgments: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long, value_enum, default_value_t = MetricName::Simile)]
    score: MetricName,
    /// Average the metric over both argument orders.
    #[arg(long)]
    symmetric: bool,
}

#[derive(Debug, Args, Serialize)]
struct BootstrapArgs {
    #[arg(long)]
    refs: PathBuf,
    #[arg(long)]
    hyps_a: PathBuf,
    #[arg(long)]
    hyps_b: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricName::Bleu)]
    score: MetricName,
    /// Embedding file, required for sim and simile.
    #[arg(long)]
    emb: Option<PathBuf>,
    #[arg(long)]
    bpe: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

fn parse_cost(s: &str) -> Result<CostKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Exit statuses: 1 usage, 2 data, 3 numerical failure.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) => 1,
        Error::NonFinite(_) | Error::ZeroNorm(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
