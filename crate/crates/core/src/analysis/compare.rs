//! Sentences ranked by how much BLEU and SIM disagree about two systems.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::SimileScorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extreme {
    /// Large BLEU gap, small SIM gap.
    Top,
    /// Large SIM gap, small BLEU gap.
    Bottom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparedSentence {
    pub index: usize,
    pub bleu_a: f64,
    pub bleu_b: f64,
    pub sim_a: f64,
    pub sim_b: f64,
    /// `(bleu_a − bleu_b)·100`.
    pub delta_bleu: f64,
    /// `(sim_a − sim_b)·100`.
    pub delta_sim: f64,
    /// `|delta_bleu| − |delta_sim|`.
    pub statistic: f64,
    pub extreme: Option<Extreme>,
}

impl ComparedSentence {
    pub fn from_scores(index: usize, bleu: (f64, f64), sim: (f64, f64)) -> Self {
        let delta_bleu = 100.0 * (bleu.0 - bleu.1);
        let delta_sim = 100.0 * (sim.0 - sim.1);
        Self {
            index,
            bleu_a: bleu.0,
            bleu_b: bleu.1,
            sim_a: sim.0,
            sim_b: sim.1,
            delta_bleu,
            delta_sim,
            statistic: delta_bleu.abs() - delta_sim.abs(),
            extreme: None,
        }
    }
}

/// Scores both systems per sentence with smoothed sentence BLEU and SIM, then
/// sorts by the statistic, largest first (ties by index). The first and last
/// `n_extreme` entries are flagged when their statistic has the matching sign.
pub fn metric_compare_sort<S: AsRef<str>, T: AsRef<str>>(
    refs: &[Vec<S>],
    hyps_a: &[Vec<T>],
    hyps_b: &[Vec<T>],
    scorer: &SimileScorer,
    n_extreme: usize,
) -> Result<Vec<ComparedSentence>> {
    for (what, n) in [("references vs system A", hyps_a.len()), ("references vs system B", hyps_b.len())] {
        if refs.len() != n {
            return Err(Error::LengthMismatch {
                what,
                left: refs.len(),
                right: n,
            });
        }
    }
    let mut rows = Vec::with_capacity(refs.len());
    for (i, ((r, a), b)) in refs.iter().zip(hyps_a).zip(hyps_b).enumerate() {
        rows.push(ComparedSentence::from_scores(
            i,
            (scorer.bleu(r, a)?, scorer.bleu(r, b)?),
            (scorer.sim(r, a)?, scorer.sim(r, b)?),
        ));
    }
    Ok(rank(rows, n_extreme))
}

/// Sorts descending by statistic and flags extremes.
pub fn rank(mut rows: Vec<ComparedSentence>, n_extreme: usize) -> Vec<ComparedSentence> {
    rows.sort_by(|x, y| y.statistic.total_cmp(&x.statistic).then(x.index.cmp(&y.index)));
    let n = rows.len();
    for (pos, row) in rows.iter_mut().enumerate() {
        row.extreme = if pos < n_extreme && row.statistic > 0.0 {
            Some(Extreme::Top)
        } else if pos + n_extreme >= n && row.statistic < 0.0 {
            Some(Extreme::Bottom)
        } else {
            None
        };
    }
    rows
}

pub fn to_table(rows: &[ComparedSentence]) -> String {
    let mut out = format!(
        "{:>6} {:>9} {:>9} {:>10} {}\n",
        "index", "dBLEU", "dSIM", "statistic", "flag"
    );
    for r in rows {
        let flag = match r.extreme {
            Some(Extreme::Top) => "top",
            Some(Extreme::Bottom) => "bottom",
            None => "",
        };
        let _ = writeln!(
            out,
            "{:>6} {:>9.2} {:>9.2} {:>10.2} {flag}",
            r.index, r.delta_bleu, r.delta_sim, r.statistic
        );
    }
    out
}
