//! Sentence and corpus metrics: BLEU, brevity and length penalties, SIM,
//! SimiLe, and the training costs derived from them.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simembed::{self, EmbeddingTable};
use crate::subword::BpeModel;

pub const DEFAULT_ALPHA: f64 = 0.25;
pub const DEFAULT_MAX_NGRAM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Exponent on the length penalty inside SimiLe.
    pub alpha: f64,
    pub max_ngram: usize,
    /// Multiply scores by 100 when formatting reports.
    pub scale_hundred: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            max_ngram: DEFAULT_MAX_NGRAM,
            scale_hundred: false,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha {} must be >= 0", self.alpha)));
        }
        if self.max_ngram == 0 {
            return Err(Error::invalid("max_ngram must be at least 1"));
        }
        Ok(())
    }

    pub fn format(&self, x: f64) -> f64 {
        if self.scale_hundred {
            100.0 * x
        } else {
            x
        }
    }
}

fn check_lengths(len_r: usize, len_h: usize) -> Result<()> {
    if len_r == 0 || len_h == 0 {
        return Err(Error::invalid("lengths must be at least 1"));
    }
    Ok(())
}

/// BLEU's brevity penalty `e^(1 − |r|/|h|)`, capped at 1 for hypotheses at
/// least as long as the reference.
pub fn brevity_penalty(len_r: usize, len_h: usize) -> Result<f64> {
    check_lengths(len_r, len_h)?;
    Ok(bp_unchecked(len_r as f64, len_h as f64))
}

fn bp_unchecked(len_r: f64, len_h: f64) -> f64 {
    if len_h >= len_r {
        1.0
    } else {
        (1.0 - len_r / len_h).exp()
    }
}

/// Symmetric length penalty `e^(1 − max/min)`.
pub fn length_penalty(len_r: usize, len_h: usize) -> Result<f64> {
    check_lengths(len_r, len_h)?;
    let (lo, hi) = (len_r.min(len_h) as f64, len_r.max(len_h) as f64);
    Ok((1.0 - hi / lo).exp())
}

/// Clipped n-gram match counts for one sentence pair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BleuStats {
    /// `matches[n-1]` is the clipped count of matching n-grams.
    pub matches: Vec<u64>,
    /// `totals[n-1]` is the number of n-grams in the hypothesis.
    pub totals: Vec<u64>,
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn new<S: AsRef<str>, T: AsRef<str>>(r: &[S], h: &[T], max_n: usize) -> Self {
        let mut matches = vec![0; max_n];
        let mut totals = vec![0; max_n];
        for n in 1..=max_n {
            if h.len() < n {
                continue;
            }
            let mut ref_counts: HashMap<Vec<&str>, u64> = HashMap::new();
            if r.len() >= n {
                for w in r.windows(n) {
                    *ref_counts
                        .entry(w.iter().map(AsRef::as_ref).collect())
                        .or_default() += 1;
                }
            }
            let mut hyp_counts: HashMap<Vec<&str>, u64> = HashMap::new();
            for w in h.windows(n) {
                *hyp_counts
                    .entry(w.iter().map(AsRef::as_ref).collect())
                    .or_default() += 1;
            }
            totals[n - 1] = (h.len() + 1 - n) as u64;
            matches[n - 1] = hyp_counts
                .iter()
                .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        Self {
            matches,
            totals,
            hyp_len: h.len() as u64,
            ref_len: r.len() as u64,
        }
    }

    pub fn add(&mut self, other: &BleuStats) {
        if self.matches.is_empty() {
            self.matches = vec![0; other.matches.len()];
            self.totals = vec![0; other.totals.len()];
        }
        for (a, b) in self.matches.iter_mut().zip(&other.matches) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// Unsmoothed BLEU from (possibly aggregated) counts.
    pub fn bleu(&self) -> f64 {
        if self.hyp_len == 0 || self.matches.contains(&0) {
            return 0.0;
        }
        let n = self.matches.len() as f64;
        let log_prec: f64 = self
            .matches
            .iter()
            .zip(&self.totals)
            .map(|(&m, &t)| (m as f64 / t as f64).ln())
            .sum();
        bp_unchecked(self.ref_len as f64, self.hyp_len as f64) * (log_prec / n).exp()
    }

    /// Sentence BLEU with +1 smoothing on both counts for n ≥ 2.
    pub fn smoothed_bleu(&self) -> f64 {
        if self.hyp_len == 0 || self.matches[0] == 0 {
            return 0.0;
        }
        let n = self.matches.len() as f64;
        let log_prec: f64 = self
            .matches
            .iter()
            .zip(&self.totals)
            .enumerate()
            .map(|(i, (&m, &t))| {
                if i == 0 {
                    (m as f64 / t as f64).ln()
                } else {
                    ((m + 1) as f64 / (t + 1) as f64).ln()
                }
            })
            .sum();
        bp_unchecked(self.ref_len as f64, self.hyp_len as f64) * (log_prec / n).exp()
    }
}

/// Smoothed sentence-level BLEU in [0, 1].
pub fn sentence_bleu_smoothed<S: AsRef<str>, T: AsRef<str>>(
    r: &[S],
    h: &[T],
    max_n: usize,
) -> Result<f64> {
    if r.is_empty() || h.is_empty() {
        return Err(Error::Empty("sentence for BLEU"));
    }
    if max_n == 0 {
        return Err(Error::invalid("max_n must be at least 1"));
    }
    Ok(BleuStats::new(r, h, max_n).smoothed_bleu())
}

/// Standard corpus BLEU from summed clipped counts, no smoothing.
pub fn corpus_bleu<S: AsRef<str>, T: AsRef<str>>(
    refs: &[Vec<S>],
    hyps: &[Vec<T>],
    max_n: usize,
) -> Result<f64> {
    if refs.len() != hyps.len() {
        return Err(Error::LengthMismatch {
            what: "references vs hypotheses",
            left: refs.len(),
            right: hyps.len(),
        });
    }
    if refs.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    if max_n == 0 {
        return Err(Error::invalid("max_n must be at least 1"));
    }
    let mut total = BleuStats::default();
    for (r, h) in refs.iter().zip(hyps) {
        total.add(&BleuStats::new(r, h, max_n));
    }
    Ok(total.bleu())
}

/// `LP(r, h)^α · SIM(r, h)` with lengths taken from the token sequences.
pub fn simile<S: AsRef<str>, T: AsRef<str>>(
    table: &EmbeddingTable,
    r: &[S],
    h: &[T],
    alpha: f64,
) -> Result<f64> {
    let s = simembed::sim(table, r, h)?;
    Ok(simile_from_parts(s, length_penalty(r.len(), h.len())?, alpha))
}

pub fn simile_from_parts(sim: f64, lp: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        sim
    } else {
        lp.powf(alpha) * sim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CostKind {
    BleuCost,
    SimileCost,
    HalfCost,
}

impl CostKind {
    pub const ALL: [CostKind; 3] = [CostKind::BleuCost, CostKind::SimileCost, CostKind::HalfCost];
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostKind::BleuCost => "bleu",
            CostKind::SimileCost => "simile",
            CostKind::HalfCost => "half",
        })
    }
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bleu" | "bleu_cost" => Ok(CostKind::BleuCost),
            "simile" | "simile_cost" => Ok(CostKind::SimileCost),
            "half" | "half_cost" => Ok(CostKind::HalfCost),
            other => Err(Error::invalid(format!("unknown cost kind {other:?}"))),
        }
    }
}

/// Which token units the length penalty counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    #[default]
    Words,
    Subwords,
}

/// Per-sentence scores reported by [`SimileScorer::score`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentenceScores {
    pub bleu: f64,
    pub sim: f64,
    pub simile: f64,
    pub lp: f64,
}

/// Scores word-tokenized sentences. SIM runs over subword units when a BPE
/// model is attached, otherwise directly over the words.
#[derive(Debug, Clone)]
pub struct SimileScorer {
    pub table: EmbeddingTable,
    pub bpe: Option<BpeModel>,
    pub config: MetricConfig,
    pub length_unit: LengthUnit,
}

impl SimileScorer {
    pub fn new(table: EmbeddingTable) -> Self {
        Self {
            table,
            bpe: None,
            config: MetricConfig::default(),
            length_unit: LengthUnit::Words,
        }
    }

    pub fn with_bpe(mut self, bpe: BpeModel) -> Self {
        self.bpe = Some(bpe);
        self
    }

    fn units<S: AsRef<str>>(&self, words: &[S]) -> Vec<String> {
        match &self.bpe {
            Some(m) => {
                let line: Vec<&str> = words.iter().map(AsRef::as_ref).collect();
                m.segment(&line.join(" "))
            }
            None => words.iter().map(|w| w.as_ref().to_owned()).collect(),
        }
    }

    /// SIM and the length penalty for a pair of word sequences.
    pub fn sim_lp<S: AsRef<str>, T: AsRef<str>>(&self, r: &[S], h: &[T]) -> Result<(f64, f64)> {
        if r.is_empty() {
            return Err(Error::Empty("reference"));
        }
        if h.is_empty() {
            return Err(Error::Empty("hypothesis"));
        }
        let (ur, uh) = (self.units(r), self.units(h));
        let s = simembed::sim(&self.table, &ur, &uh)?;
        let lp = match self.length_unit {
            LengthUnit::Words => length_penalty(r.len(), h.len())?,
            LengthUnit::Subwords => length_penalty(ur.len(), uh.len())?,
        };
        Ok((s, lp))
    }

    pub fn sim<S: AsRef<str>, T: AsRef<str>>(&self, r: &[S], h: &[T]) -> Result<f64> {
        Ok(self.sim_lp(r, h)?.0)
    }

    pub fn simile<S: AsRef<str>, T: AsRef<str>>(&self, r: &[S], h: &[T]) -> Result<f64> {
        let (s, lp) = self.sim_lp(r, h)?;
        Ok(simile_from_parts(s, lp, self.config.alpha))
    }

    pub fn bleu<S: AsRef<str>, T: AsRef<str>>(&self, r: &[S], h: &[T]) -> Result<f64> {
        sentence_bleu_smoothed(r, h, self.config.max_ngram)
    }

    pub fn score<S: AsRef<str>, T: AsRef<str>>(&self, r: &[S], h: &[T]) -> Result<SentenceScores> {
        let (s, lp) = self.sim_lp(r, h)?;
        Ok(SentenceScores {
            bleu: self.bleu(r, h)?,
            sim: s,
            simile: simile_from_parts(s, lp, self.config.alpha),
            lp,
        })
    }

    /// Training cost in [0, 1]; SimiLe is floored at 0 first.
    pub fn cost<S: AsRef<str>, T: AsRef<str>>(&self, kind: CostKind, r: &[S], h: &[T]) -> Result<f64> {
        Ok(match kind {
            CostKind::BleuCost => 1.0 - self.bleu(r, h)?,
            CostKind::SimileCost => 1.0 - self.simile(r, h)?.max(0.0),
            CostKind::HalfCost => {
                1.0 - 0.5 * (self.bleu(r, h)? + self.simile(r, h)?.max(0.0))
            }
        })
    }
}

/// Averages a metric over both argument orders.
pub fn symmetric<S, F>(metric: F, a: &[S], b: &[S]) -> Result<f64>
where
    F: Fn(&[S], &[S]) -> Result<f64>,
{
    Ok(0.5 * (metric(a, b)? + metric(b, a)?))
}

/// Mean sentence-level SIM over aligned corpora.
pub fn corpus_sim<S: AsRef<str>, T: AsRef<str>>(
    scorer: &SimileScorer,
    refs: &[Vec<S>],
    hyps: &[Vec<T>],
) -> Result<f64> {
    corpus_mean(refs, hyps, |r, h| scorer.sim(r, h))
}

pub(crate) fn corpus_mean<S, T, F>(refs: &[Vec<S>], hyps: &[Vec<T>], f: F) -> Result<f64>
where
    F: Fn(&[S], &[T]) -> Result<f64>,
{
    if refs.len() != hyps.len() {
        return Err(Error::LengthMismatch {
            what: "references vs hypotheses",
            left: refs.len(),
            right: hyps.len(),
        });
    }
    if refs.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let mut total = 0.0;
    for (r, h) in refs.iter().zip(hyps) {
        total += f(r, h)?;
    }
    Ok(total / refs.len() as f64)
}
