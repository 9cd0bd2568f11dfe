//! SimiLe: a semantic-similarity reward for sequence-level training of
//! translation models, together with the machinery around it.
//!
//! * [`subword`] learns and applies byte-pair-encoding segmentation.
//! * [`simembed`] is the averaging subword-embedding encoder, cosine scorer
//!   and margin-loss trainer with mega-batch negative mining.
//! * [`metrics`] holds BLEU (sentence and corpus), length penalties, SIM,
//!   SimiLe and the training costs built from them.
//! * [`riskopt`] implements minimum-risk fine-tuning over n-best lists for a
//!   small position-wise lexical translation model.
//! * [`analysis`] covers the evaluation tooling: histograms, n-best score
//!   diversity, bucketed lexical F1, metric comparison, rank correlation and
//!   paired bootstrap resampling.
//! * [`data`] reads and writes every file format and implements paraphrase
//!   filtering.
//! * [`synth`] generates the deterministic synthetic tasks used by tests and
//!   the bundled fixtures.

pub mod analysis;
pub mod data;
pub mod error;
pub mod metrics;
pub mod riskopt;
pub mod simembed;
pub mod subword;
pub mod synth;

pub use error::{Error, Result};

/// Splits on Unicode whitespace. Used for every word-level view of a sentence.
pub fn words(sentence: &str) -> Vec<String> {
    sentence.split_whitespace().map(str::to_owned).collect()
}
