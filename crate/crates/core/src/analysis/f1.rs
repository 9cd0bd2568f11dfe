//! Lexical F1 by word-frequency or tag bucket.
//!
//! Matching is clipped per sentence: a word type contributes
//! `min(count in reference, count in hypothesis)` matches. Counts are summed
//! over all types in a bucket before precision, recall and F1 are computed.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frequency buckets as `(label, lowest, highest)` reference counts. The "0"
/// bucket holds words that only occur in system output.
pub const FREQUENCY_BUCKETS: [(&str, u64, u64); 7] = [
    ("0", 0, 0),
    ("1", 1, 1),
    ("2-5", 2, 5),
    ("6-10", 6, 10),
    ("11-100", 11, 100),
    ("101-1000", 101, 1000),
    ("1001+", 1001, u64::MAX),
];

pub const UNTAGGED: &str = "<untagged>";

#[derive(Debug, Clone, Copy)]
pub enum BucketScheme<'a> {
    /// Bucket types by their frequency on the reference side.
    Frequency,
    /// Bucket types by tag (`token -> tag`); unknown types go to `<untagged>`.
    Tags(&'a HashMap<String, String>),
}

impl BucketScheme<'_> {
    fn name(&self) -> &'static str {
        match self {
            BucketScheme::Frequency => "frequency",
            BucketScheme::Tags(_) => "tag",
        }
    }

    fn labels(&self) -> Vec<String> {
        match self {
            BucketScheme::Frequency => FREQUENCY_BUCKETS.iter().map(|b| b.0.to_owned()).collect(),
            BucketScheme::Tags(map) => {
                let mut tags: Vec<String> = map.values().cloned().collect::<BTreeSet<_>>().into_iter().collect();
                tags.retain(|t| t != UNTAGGED);
                tags.push(UNTAGGED.to_owned());
                tags
            }
        }
    }

    fn label_for(&self, token: &str, ref_freq: u64) -> String {
        match self {
            BucketScheme::Frequency => FREQUENCY_BUCKETS
                .iter()
                .find(|(_, lo, hi)| (*lo..=*hi).contains(&ref_freq))
                .map(|b| b.0.to_owned())
                .expect("buckets cover every count"),
            BucketScheme::Tags(map) => map.get(token).cloned().unwrap_or_else(|| UNTAGGED.to_owned()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Bucket {
    pub label: String,
    pub matches: u64,
    pub hyp_count: u64,
    pub ref_count: u64,
    /// `None` when the bucket holds no tokens on either side.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl F1Bucket {
    fn new(label: String, matches: u64, hyp_count: u64, ref_count: u64) -> Self {
        let populated = hyp_count + ref_count > 0;
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let (p, r) = (ratio(matches, hyp_count), ratio(matches, ref_count));
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        Self {
            label,
            matches,
            hyp_count,
            ref_count,
            precision: populated.then_some(p),
            recall: populated.then_some(r),
            f1: populated.then_some(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub scheme: String,
    pub buckets: Vec<F1Bucket>,
}

impl F1Report {
    pub fn bucket(&self, label: &str) -> Option<&F1Bucket> {
        self.buckets.iter().find(|b| b.label == label)
    }

    /// Micro-averaged F1 over every bucket together.
    pub fn overall(&self) -> F1Bucket {
        let (m, h, r) = self.buckets.iter().fold((0, 0, 0), |acc, b| {
            (acc.0 + b.matches, acc.1 + b.hyp_count, acc.2 + b.ref_count)
        });
        F1Bucket::new("all".into(), m, h, r)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<12} {:>8} {:>8} {:>8}\n", self.scheme, "P", "R", "F1");
        for b in &self.buckets {
            match (b.precision, b.recall, b.f1) {
                (Some(p), Some(r), Some(f)) => {
                    let _ = writeln!(
                        out,
                        "{:<12} {:>8.2} {:>8.2} {:>8.2}",
                        b.label,
                        100.0 * p,
                        100.0 * r,
                        100.0 * f
                    );
                }
                _ => {
                    let _ = writeln!(out, "{:<12} {:>8} {:>8} {:>8}", b.label, "-", "-", "-");
                }
            }
        }
        out
    }
}

/// Per-bucket lexical precision, recall and F1 of `hyps` against `refs`.
pub fn lexical_f1(
    refs: &[Vec<String>],
    hyps: &[Vec<String>],
    scheme: BucketScheme<'_>,
) -> Result<F1Report> {
    if refs.len() != hyps.len() {
        return Err(Error::LengthMismatch {
            what: "references vs hypotheses",
            left: refs.len(),
            right: hyps.len(),
        });
    }
    // type -> (matches, hyp count, ref count)
    let mut per_type: BTreeMap<&str, (u64, u64, u64)> = BTreeMap::new();
    for (r, h) in refs.iter().zip(hyps) {
        let mut rc: HashMap<&str, u64> = HashMap::new();
        let mut hc: HashMap<&str, u64> = HashMap::new();
        for t in r {
            *rc.entry(t).or_default() += 1;
        }
        for t in h {
            *hc.entry(t).or_default() += 1;
        }
        for (&t, &c) in &rc {
            let e = per_type.entry(t).or_default();
            e.2 += c;
            e.0 += c.min(hc.get(t).copied().unwrap_or(0));
        }
        for (&t, &c) in &hc {
            per_type.entry(t).or_default().1 += c;
        }
    }

    let mut sums: BTreeMap<String, (u64, u64, u64)> = BTreeMap::new();
    for (t, (m, h, r)) in per_type {
        let e = sums.entry(scheme.label_for(t, r)).or_default();
        e.0 += m;
        e.1 += h;
        e.2 += r;
    }
    let buckets = scheme
        .labels()
        .into_iter()
        .map(|label| {
            let (m, h, r) = sums.get(&label).copied().unwrap_or_default();
            F1Bucket::new(label, m, h, r)
        })
        .collect();
    Ok(F1Report {
        scheme: scheme.name().to_owned(),
        buckets,
    })
}

/// Per-bucket F1 differences, one column per corpus plus a row average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1DeltaTable {
    pub scheme: String,
    pub columns: Vec<String>,
    pub rows: Vec<F1DeltaRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1DeltaRow {
    pub label: String,
    /// `F1_a − F1_b` per corpus; `None` where either bucket is empty.
    pub deltas: Vec<Option<f64>>,
    /// Mean of the available deltas.
    pub average: Option<f64>,
}

impl F1DeltaTable {
    pub fn row(&self, label: &str) -> Option<&F1DeltaRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Deltas on the ×100 scale.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<12}", "bucket");
        for c in &self.columns {
            let _ = write!(out, " {c:>10}");
        }
        out.push_str("        Avg\n");
        let cell = |v: Option<f64>| v.map_or_else(|| format!("{:>10}", "-"), |d| format!("{:>10.2}", 100.0 * d));
        for r in &self.rows {
            let _ = write!(out, "{:<12}", r.label);
            for d in &r.deltas {
                let _ = write!(out, " {}", cell(*d));
            }
            let _ = writeln!(out, " {}", cell(r.average));
        }
        out
    }
}

fn bucket_deltas(a: &F1Report, b: &F1Report) -> Result<Vec<(String, Option<f64>)>> {
    let same = a.scheme == b.scheme
        && a.buckets.len() == b.buckets.len()
        && a.buckets.iter().zip(&b.buckets).all(|(x, y)| x.label == y.label);
    if !same {
        return Err(Error::invalid("F1 reports use different bucket schemes"));
    }
    Ok(a.buckets
        .iter()
        .zip(&b.buckets)
        .map(|(x, y)| {
            let d = match (x.f1, y.f1) {
                (Some(fa), Some(fb)) => Some(fa - fb),
                _ => None,
            };
            (x.label.clone(), d)
        })
        .collect())
}

/// `F1_a − F1_b` per bucket for one corpus.
pub fn f1_delta(a: &F1Report, b: &F1Report) -> Result<F1DeltaTable> {
    f1_delta_multi(&[("delta".to_owned(), a.clone(), b.clone())])
}

/// Delta table across several corpora; the average column is the mean over
/// corpora where the bucket is populated in both systems.
pub fn f1_delta_multi(corpora: &[(String, F1Report, F1Report)]) -> Result<F1DeltaTable> {
    let first = corpora.first().ok_or(Error::Empty("corpora"))?;
    let scheme = first.1.scheme.clone();
    let mut labels: Vec<String> = Vec::new();
    let mut columns = Vec::with_capacity(corpora.len());
    let mut per_corpus: Vec<HashMap<String, Option<f64>>> = Vec::with_capacity(corpora.len());
    for (name, a, b) in corpora {
        if a.scheme != scheme {
            return Err(Error::invalid("F1 reports use different bucket schemes"));
        }
        let deltas = bucket_deltas(a, b)?;
        for (l, _) in &deltas {
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
        columns.push(name.clone());
        per_corpus.push(deltas.into_iter().collect());
    }
    let rows = labels
        .into_iter()
        .map(|label| {
            let deltas: Vec<Option<f64>> = per_corpus
                .iter()
                .map(|m| m.get(&label).copied().flatten())
                .collect();
            let present: Vec<f64> = deltas.iter().flatten().copied().collect();
            let average = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
            F1DeltaRow {
                label,
                deltas,
                average,
            }
        })
        .collect();
    Ok(F1DeltaTable {
        scheme,
        columns,
        rows,
    })
}
