//! Evaluation analyses over metric scores and system outputs.
//!
//! Every report type serializes to JSON and renders a plain-text table.

mod bootstrap;
mod compare;
mod correlation;
mod f1;
mod hist;
mod pairs;

pub use bootstrap::{paired_bootstrap, BootstrapMetric, BootstrapResult, SIGNIFICANCE_LEVEL};
pub use compare::{metric_compare_sort, rank as rank_compared, to_table as compare_table, ComparedSentence, Extreme};
pub use correlation::{average_ranks, pearson, spearman, CorrelationReport, JudgmentSet};
pub use f1::{
    f1_delta, f1_delta_multi, lexical_f1, BucketScheme, F1Bucket, F1DeltaRow, F1DeltaTable, F1Report,
    FREQUENCY_BUCKETS, UNTAGGED,
};
pub use hist::{cost_histogram, Histogram, DEFAULT_BIN_WIDTH};
pub use pairs::{nbest_pair_stats, score_lists, PairDiffStats, DISTINCT_EPS};
