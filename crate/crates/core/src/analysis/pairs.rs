use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riskopt::NBestList;

/// Two scores count as different when they differ by more than this.
pub const DISTINCT_EPS: f64 = 1e-9;

/// Score diversity over all unordered candidate pairs within n-best lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDiffStats {
    pub total_pairs: usize,
    /// Fraction of pairs whose scores differ.
    pub distinct_fraction: f64,
    /// Mean absolute score difference on a ×100 scale.
    pub mean_abs_diff_x100: f64,
}

impl PairDiffStats {
    pub fn to_table(&self, label: &str) -> String {
        format!(
            "{label:<12} pairs {:>8}  distinct {:>6.1}%  mean |diff| {:>6.2}\n",
            self.total_pairs,
            100.0 * self.distinct_fraction,
            self.mean_abs_diff_x100
        )
    }
}

/// Scores every candidate of every list against its reference.
pub fn score_lists<F>(lists: &[NBestList], scorer: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[String], &[String]) -> Result<f64>,
{
    lists
        .iter()
        .map(|l| {
            l.candidates
                .iter()
                .map(|c| scorer(&l.reference, &c.tokens))
                .collect()
        })
        .collect()
}

/// Pairwise statistics over per-list candidate scores in `[0, 1]`.
pub fn nbest_pair_stats(scores: &[Vec<f64>]) -> Result<PairDiffStats> {
    if scores.is_empty() {
        return Err(Error::Empty("n-best lists"));
    }
    let mut total = 0usize;
    let mut distinct = 0usize;
    let mut abs_sum = 0.0;
    for (i, list) in scores.iter().enumerate() {
        if list.len() < 2 {
            return Err(Error::invalid(format!(
                "n-best list {i} has {} candidate(s); at least 2 are needed",
                list.len()
            )));
        }
        for a in 0..list.len() {
            for b in a + 1..list.len() {
                let d = (list[a] - list[b]).abs();
                total += 1;
                abs_sum += d;
                if d > DISTINCT_EPS {
                    distinct += 1;
                }
            }
        }
    }
    Ok(PairDiffStats {
        total_pairs: total,
        distinct_fraction: distinct as f64 / total as f64,
        mean_abs_diff_x100: 100.0 * abs_sum / total as f64,
    })
}
