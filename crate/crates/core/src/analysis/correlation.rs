//! Pearson and Spearman correlation between metric scores and human judgments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Paired `(system_score, human_score)` observations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JudgmentSet {
    pub pairs: Vec<(f64, f64)>,
}

impl JudgmentSet {
    pub fn new(pairs: Vec<(f64, f64)>) -> Self {
        Self { pairs }
    }

    pub fn from_columns(system: &[f64], human: &[f64]) -> Result<Self> {
        if system.len() != human.len() {
            return Err(Error::LengthMismatch {
                what: "system vs human scores",
                left: system.len(),
                right: human.len(),
            });
        }
        Ok(Self::new(system.iter().copied().zip(human.iter().copied()).collect()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn columns(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.pairs.len() < 2 {
            return Err(Error::invalid(format!(
                "correlation needs at least 2 pairs, got {}",
                self.pairs.len()
            )));
        }
        if self.pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::NonFinite("judgment score".into()));
        }
        Ok(self.pairs.iter().copied().unzip())
    }
}

/// 1-based ranks, ties sharing the mean of the positions they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // Positions i+1 ..= j share their mean.
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn pearson_columns(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::invalid("system scores have zero variance"));
    }
    if syy == 0.0 {
        return Err(Error::invalid("human scores have zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn pearson(set: &JudgmentSet) -> Result<f64> {
    let (x, y) = set.columns()?;
    pearson_columns(&x, &y)
}

/// Pearson correlation of average ranks.
pub fn spearman(set: &JudgmentSet) -> Result<f64> {
    let (x, y) = set.columns()?;
    pearson_columns(&average_ranks(&x), &average_ranks(&y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n: usize,
    pub pearson: f64,
    pub spearman: f64,
}

impl CorrelationReport {
    pub fn compute(set: &JudgmentSet) -> Result<Self> {
        Ok(Self {
            n: set.len(),
            pearson: pearson(set)?,
            spearman: spearman(set)?,
        })
    }

    pub fn to_table(&self) -> String {
        format!(
            "n\t{}\npearson\t{:.4}\nspearman\t{:.4}\n",
            self.n, self.pearson, self.spearman
        )
    }
}
