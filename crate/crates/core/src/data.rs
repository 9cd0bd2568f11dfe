//! File formats and paraphrase-corpus filtering.
//!
//! Every reader reports the 1-based line number of the first malformed
//! record. Floats are written with Rust's shortest round-trip formatting so
//! that save followed by load reproduces every value exactly.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::SimileScorer;
use crate::riskopt::{Candidate, NBestList};
use crate::simembed::{EmbeddingTable, ParaphrasePair};
use crate::words;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Non-empty lines tokenized on whitespace; an empty line is an error.
pub fn load_sentences(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let w = words(line);
            if w.is_empty() {
                Err(Error::parse(display(path), i + 1, "empty sentence"))
            } else {
                Ok(w)
            }
        })
        .collect()
}

pub fn save_sentences<S: AsRef<str>>(path: &Path, sentences: &[Vec<S>]) -> Result<()> {
    let mut out = String::new();
    for s in sentences {
        let line: Vec<&str> = s.iter().map(AsRef::as_ref).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    write_text(path, &out)
}

/// Aligned source and reference sentences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelCorpus {
    pub name: String,
    pub sources: Vec<Vec<String>>,
    pub references: Vec<Vec<String>>,
}

impl ParallelCorpus {
    pub fn new(name: impl Into<String>, sources: Vec<Vec<String>>, references: Vec<Vec<String>>) -> Result<Self> {
        if sources.len() != references.len() {
            return Err(Error::LengthMismatch {
                what: "sources vs references",
                left: sources.len(),
                right: references.len(),
            });
        }
        if sources.iter().chain(&references).any(Vec::is_empty) {
            return Err(Error::Empty("corpus sentence"));
        }
        Ok(Self {
            name: name.into(),
            sources,
            references,
        })
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn pairs(&self) -> Vec<(Vec<String>, Vec<String>)> {
        self.sources.iter().cloned().zip(self.references.iter().cloned()).collect()
    }

    pub fn from_pairs(name: impl Into<String>, pairs: &[(Vec<String>, Vec<String>)]) -> Result<Self> {
        let (s, r) = pairs.iter().cloned().unzip();
        Self::new(name, s, r)
    }
}

pub fn load_parallel(src: &Path, reference: &Path) -> Result<ParallelCorpus> {
    let name = src
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ParallelCorpus::new(name, load_sentences(src)?, load_sentences(reference)?)
}

pub fn save_parallel(corpus: &ParallelCorpus, src: &Path, reference: &Path) -> Result<()> {
    save_sentences(src, &corpus.sources)?;
    save_sentences(reference, &corpus.references)
}

const NBEST_SEP: &str = " ||| ";

/// Writes `sentence_index ||| hypothesis ||| logprob`, one candidate per line.
pub fn save_nbest(path: &Path, lists: &[NBestList]) -> Result<()> {
    let mut out = String::new();
    for (i, list) in lists.iter().enumerate() {
        for c in &list.candidates {
            let text = c.tokens.join(" ");
            if text.contains("|||") {
                return Err(Error::invalid(format!("hypothesis {text:?} contains the field separator")));
            }
            let _ = writeln!(out, "{i}{NBEST_SEP}{text}{NBEST_SEP}{}", c.logprob);
        }
    }
    write_text(path, &out)
}

/// Candidates grouped by sentence index; indices absent from the file yield
/// empty groups. Costs are not stored and come back as `None`.
pub fn load_nbest(path: &Path) -> Result<Vec<Vec<Candidate>>> {
    let text = read_text(path)?;
    let mut groups: BTreeMap<usize, Vec<Candidate>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let err = |msg: String| Error::parse(display(path), i + 1, msg);
        let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 fields separated by |||, found {}", fields.len())));
        }
        let idx: usize = fields[0]
            .parse()
            .map_err(|_| err(format!("bad sentence index {:?}", fields[0])))?;
        let logprob: f64 = fields[2]
            .parse()
            .map_err(|_| err(format!("bad log-probability {:?}", fields[2])))?;
        let tokens = words(fields[1]);
        if tokens.is_empty() {
            return Err(err("empty hypothesis".into()));
        }
        groups.entry(idx).or_default().push(Candidate {
            tokens,
            logprob,
            cost: None,
        });
    }
    let n = groups.keys().next_back().map_or(0, |&k| k + 1);
    let mut out = vec![Vec::new(); n];
    for (k, v) in groups {
        out[k] = v;
    }
    Ok(out)
}

/// Pairs loaded candidates with their sources and references.
pub fn attach_nbest(
    candidates: Vec<Vec<Candidate>>,
    sources: &[Vec<String>],
    references: &[Vec<String>],
    k: usize,
) -> Result<Vec<NBestList>> {
    if candidates.len() != references.len() || sources.len() != references.len() {
        return Err(Error::LengthMismatch {
            what: "n-best lists vs references",
            left: candidates.len(),
            right: references.len(),
        });
    }
    Ok(candidates
        .into_iter()
        .zip(sources.iter().zip(references))
        .map(|(c, (s, r))| NBestList {
            source: s.clone(),
            reference: r.clone(),
            exhausted: c.len() < k,
            candidates: c,
        })
        .collect())
}

/// Header `<count> <dim>`, then `token v1 ... vdim` per row, `<unk>` included.
pub fn save_embeddings(path: &Path, table: &EmbeddingTable) -> Result<()> {
    let mut out = format!("{} {}\n", table.len(), table.dim());
    for (id, tok) in table.tokens().iter().enumerate() {
        out.push_str(tok);
        for v in table.row(id) {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let text = read_text(path)?;
    let p = display(path);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse(&p, 1, "missing header"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let parse_usize = |s: &str| s.parse::<usize>().ok();
    let (count, dim) = match parts.as_slice() {
        [c, d] => match (parse_usize(c), parse_usize(d)) {
            (Some(c), Some(d)) if d > 0 => (c, d),
            _ => return Err(Error::parse(&p, 1, "header must be \"<count> <dim>\"")),
        },
        _ => return Err(Error::parse(&p, 1, "header must be \"<count> <dim>\"")),
    };
    let mut rows = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let ln = i + 2;
        let mut it = line.split_whitespace();
        let Some(tok) = it.next() else {
            return Err(Error::parse(&p, ln, "empty line"));
        };
        let v: Vec<f64> = it
            .map(|s| s.parse::<f64>().map_err(|_| Error::parse(&p, ln, format!("bad number {s:?}"))))
            .collect::<Result<_>>()?;
        if v.len() != dim {
            return Err(Error::parse(&p, ln, format!("expected {dim} values, found {}", v.len())));
        }
        rows.push((tok.to_owned(), v));
    }
    if rows.len() != count {
        return Err(Error::parse(
            &p,
            rows.len() + 1,
            format!("header declares {count} rows, file has {}", rows.len()),
        ));
    }
    EmbeddingTable::from_rows(rows).map_err(|e| Error::parse(&p, 0, e.to_string()))
}

/// A row of a judgment file: `reference<TAB>hypothesis<TAB>human_score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub reference: Vec<String>,
    pub hypothesis: Vec<String>,
    pub human: f64,
}

pub fn load_judgments(path: &Path) -> Result<Vec<Judgment>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let err = |msg: String| Error::parse(display(path), i + 1, msg);
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(err(format!("expected 3 tab-separated fields, found {}", f.len())));
            }
            let human: f64 = f[2]
                .trim()
                .parse()
                .map_err(|_| err(format!("non-numeric score {:?}", f[2])))?;
            let (reference, hypothesis) = (words(f[0]), words(f[1]));
            if reference.is_empty() || hypothesis.is_empty() {
                return Err(err("empty sentence".into()));
            }
            Ok(Judgment {
                reference,
                hypothesis,
                human,
            })
        })
        .collect()
}

pub fn save_judgments(path: &Path, rows: &[Judgment]) -> Result<()> {
    let mut out = String::new();
    for j in rows {
        let _ = writeln!(out, "{}\t{}\t{}", j.reference.join(" "), j.hypothesis.join(" "), j.human);
    }
    write_text(path, &out)
}

/// Reads `token<TAB>tag` lines (blank lines separate sentences) and assigns
/// each token type its most frequent tag, ties to the smallest tag.
pub fn load_tags(path: &Path) -> Result<HashMap<String, String>> {
    let text = read_text(path)?;
    let mut counts: HashMap<String, BTreeMap<String, usize>> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 2 || f[0].trim().is_empty() || f[1].trim().is_empty() {
            return Err(Error::parse(display(path), i + 1, "expected \"token<TAB>tag\""));
        }
        *counts
            .entry(f[0].trim().to_owned())
            .or_default()
            .entry(f[1].trim().to_owned())
            .or_default() += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(tok, tags)| {
            let best = tags
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(t, _)| t.clone())
                .expect("at least one tag per token");
            (tok, best)
        })
        .collect())
}

/// Paraphrase pairs as `s<TAB>s′` lines.
pub fn load_pairs(path: &Path) -> Result<Vec<ParaphrasePair>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 2 {
                return Err(Error::parse(display(path), i + 1, "expected \"s<TAB>s'\""));
            }
            ParaphrasePair::new(words(f[0]), words(f[1]))
                .map_err(|e| Error::parse(display(path), i + 1, e.to_string()))
        })
        .collect()
}

pub fn save_pairs(path: &Path, pairs: &[ParaphrasePair]) -> Result<()> {
    let mut out = String::new();
    for p in pairs {
        let _ = writeln!(out, "{}\t{}", p.s.join(" "), p.s_prime.join(" "));
    }
    write_text(path, &out)
}

/// Shared distinct lowercased word trigrams divided by the smaller distinct
/// trigram count; 0 when either side has fewer than three words.
pub fn trigram_overlap<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T]) -> f64 {
    fn grams<S: AsRef<str>>(x: &[S]) -> HashSet<[String; 3]> {
        x.windows(3)
            .map(|w| [0, 1, 2].map(|i| w[i].as_ref().to_lowercase()))
            .collect()
    }
    if a.len() < 3 || b.len() < 3 {
        return 0.0;
    }
    let (ga, gb) = (grams(a), grams(b));
    let shared = ga.intersection(&gb).count();
    shared as f64 / ga.len().min(gb.len()) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub sim_min: f64,
    pub trigram_max: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            sim_min: 0.5,
            trigram_max: 0.2,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.sim_min) {
            return Err(Error::invalid(format!("sim_min {} outside [-1, 1]", self.sim_min)));
        }
        if !(0.0..=1.0).contains(&self.trigram_max) {
            return Err(Error::invalid(format!("trigram_max {} outside [0, 1]", self.trigram_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterStats {
    pub input: usize,
    pub kept: usize,
    pub rejected_sim: usize,
    pub rejected_overlap: usize,
    pub rejected_both: usize,
}

/// Keeps pairs with `sim ≥ sim_min` and `trigram_overlap ≤ trigram_max`,
/// preserving order.
pub fn paranmt_filter(
    pairs: &[ParaphrasePair],
    scorer: &SimileScorer,
    cfg: &FilterConfig,
) -> Result<(Vec<ParaphrasePair>, FilterStats)> {
    cfg.validate()?;
    let verdicts: Vec<(bool, bool)> = pairs
        .par_iter()
        .map(|p| {
            let sim_ok = scorer.sim(&p.s, &p.s_prime)? >= cfg.sim_min;
            let overlap_ok = trigram_overlap(&p.s, &p.s_prime) <= cfg.trigram_max;
            Ok((sim_ok, overlap_ok))
        })
        .collect::<Result<_>>()?;
    let mut stats = FilterStats {
        input: pairs.len(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    for (p, v) in pairs.iter().zip(verdicts) {
        match v {
            (true, true) => {
                stats.kept += 1;
                kept.push(p.clone());
            }
            (false, true) => stats.rejected_sim += 1,
            (true, false) => stats.rejected_overlap += 1,
            (false, false) => stats.rejected_both += 1,
        }
    }
    Ok((kept, stats))
}
