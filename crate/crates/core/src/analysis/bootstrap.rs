//! Paired bootstrap resampling for comparing two systems on the same test set.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::BleuStats;

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;
pub const MIN_SAMPLES: usize = 100;

/// Per-sentence statistics from which a corpus metric is recomputed on every
/// resample.
#[derive(Debug, Clone)]
pub enum BootstrapMetric {
    /// Corpus BLEU from summed n-gram counts.
    Bleu { a: Vec<BleuStats>, b: Vec<BleuStats> },
    /// Mean of sentence-level scores (SIM, SimiLe, ...).
    Mean { a: Vec<f64>, b: Vec<f64> },
}

impl BootstrapMetric {
    pub fn bleu<S: AsRef<str>, T: AsRef<str>>(
        refs: &[Vec<S>],
        hyps_a: &[Vec<T>],
        hyps_b: &[Vec<T>],
        max_n: usize,
    ) -> Result<Self> {
        check_aligned(refs.len(), hyps_a.len(), hyps_b.len())?;
        let stats = |hyps: &[Vec<T>]| {
            refs.iter()
                .zip(hyps)
                .map(|(r, h)| BleuStats::new(r, h, max_n))
                .collect()
        };
        Ok(BootstrapMetric::Bleu {
            a: stats(hyps_a),
            b: stats(hyps_b),
        })
    }

    pub fn mean(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        check_aligned(a.len(), a.len(), b.len())?;
        Ok(BootstrapMetric::Mean { a, b })
    }

    pub fn len(&self) -> usize {
        match self {
            BootstrapMetric::Bleu { a, .. } => a.len(),
            BootstrapMetric::Mean { a, .. } => a.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The same metric with the systems exchanged.
    pub fn swapped(&self) -> Self {
        match self {
            BootstrapMetric::Bleu { a, b } => BootstrapMetric::Bleu {
                a: b.clone(),
                b: a.clone(),
            },
            BootstrapMetric::Mean { a, b } => BootstrapMetric::Mean {
                a: b.clone(),
                b: a.clone(),
            },
        }
    }

    fn score(&self, idx: &[usize]) -> (f64, f64) {
        match self {
            BootstrapMetric::Bleu { a, b } => {
                let sum = |s: &[BleuStats]| {
                    let mut t = BleuStats::default();
                    for &i in idx {
                        t.add(&s[i]);
                    }
                    t.bleu()
                };
                (sum(a), sum(b))
            }
            BootstrapMetric::Mean { a, b } => {
                let n = idx.len() as f64;
                let mean = |s: &[f64]| idx.iter().map(|&i| s[i]).sum::<f64>() / n;
                (mean(a), mean(b))
            }
        }
    }
}

fn check_aligned(n: usize, a: usize, b: usize) -> Result<()> {
    if n != a || n != b {
        return Err(Error::LengthMismatch {
            what: "system outputs",
            left: a,
            right: if n != a { n } else { b },
        });
    }
    if n == 0 {
        return Err(Error::Empty("test set"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub samples: usize,
    pub seed: u64,
    pub full_a: f64,
    pub full_b: f64,
    /// Fraction of resamples where A scores strictly higher.
    pub win_a: f64,
    pub win_b: f64,
    pub ties: f64,
    /// One minus the win fraction of the system that is better on the full
    /// test set; 1.0 when the full-set scores are equal.
    pub p_value: f64,
    pub significant: bool,
}

impl BootstrapResult {
    pub fn to_table(&self) -> String {
        format!(
            "system A\t{:.4}\nsystem B\t{:.4}\nwin A\t{:.4}\nwin B\t{:.4}\nties\t{:.4}\np_value\t{:.4}\nsignificant\t{}\n",
            self.full_a, self.full_b, self.win_a, self.win_b, self.ties, self.p_value, self.significant
        )
    }
}

/// Resample `i` draws sentence indices with replacement from a generator
/// seeded with `seed + i`, so results do not depend on thread scheduling.
pub fn paired_bootstrap(metric: &BootstrapMetric, samples: usize, seed: u64) -> Result<BootstrapResult> {
    if samples < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "bootstrap needs at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let n = metric.len();
    if n == 0 {
        return Err(Error::Empty("test set"));
    }
    let all: Vec<usize> = (0..n).collect();
    let (full_a, full_b) = metric.score(&all);
    let outcomes: Vec<std::cmp::Ordering> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let (a, b) = metric.score(&idx);
            a.total_cmp(&b)
        })
        .collect();
    let count = |o: std::cmp::Ordering| outcomes.iter().filter(|&&x| x == o).count() as f64 / samples as f64;
    let win_a = count(std::cmp::Ordering::Greater);
    let win_b = count(std::cmp::Ordering::Less);
    let ties = count(std::cmp::Ordering::Equal);
    let p_value = if full_a > full_b {
        1.0 - win_a
    } else if full_b > full_a {
        1.0 - win_b
    } else {
        1.0
    };
    Ok(BootstrapResult {
        samples,
        seed,
        full_a,
        full_b,
        win_a,
        win_b,
        ties,
        p_value,
        significant: p_value < SIGNIFICANCE_LEVEL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words;

    #[test]
    fn identical_systems() {
        let refs = vec![words("the cat sat on the mat"), words("a b c d e")];
        let hyps = vec![words("the cat sat on a mat"), words("a b c d")];
        let m = BootstrapMetric::bleu(&refs, &hyps, &hyps, 4).unwrap();
        let r = paired_bootstrap(&m, 200, 1).unwrap();
        assert_eq!((r.ties, r.p_value, r.significant), (1.0, 1.0, false));
    }

    #[test]
    fn dominant_system() {
        let a: Vec<f64> = (0..30).map(|i| 0.5 + 0.01 * f64::from(i)).collect();
        let b: Vec<f64> = a.iter().map(|x| x - 0.1).collect();
        let r = paired_bootstrap(&BootstrapMetric::mean(a, b).unwrap(), 500, 3).unwrap();
        assert_eq!((r.win_a, r.p_value), (1.0, 0.0));
        assert!(r.significant);
    }

    #[test]
    fn swap_exchanges_wins_and_is_deterministic() {
        let a: Vec<f64> = (0..25).map(|i| f64::from((i * 7) % 11) / 11.0).collect();
        let b: Vec<f64> = (0..25).map(|i| f64::from((i * 5) % 13) / 13.0).collect();
        let m = BootstrapMetric::mean(a, b).unwrap();
        let r1 = paired_bootstrap(&m, 300, 9).unwrap();
        let r2 = paired_bootstrap(&m, 300, 9).unwrap();
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
        let s = paired_bootstrap(&m.swapped(), 300, 9).unwrap();
        assert_eq!((s.win_a, s.win_b, s.ties), (r1.win_b, r1.win_a, r1.ties));
        assert_eq!(s.p_value, r1.p_value);
    }

    #[test]
    fn rejects_bad_input() {
        let m = BootstrapMetric::mean(vec![1.0], vec![0.0]).unwrap();
        assert!(paired_bootstrap(&m, 10, 0).is_err());
        assert!(BootstrapMetric::mean(vec![1.0], vec![]).is_err());
    }
}
