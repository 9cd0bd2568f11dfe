//! Byte-pair-encoding subword segmentation.
//!
//! Words are split on whitespace and turned into code-point symbols, with an
//! end-of-word marker glued onto the final symbol (`"cat"` becomes
//! `["c", "a", "t</w>"]`). Learning repeatedly merges the most frequent
//! adjacent pair, breaking frequency ties by the lexicographically smallest
//! `(left, right)` pair, so a corpus and a vocabulary budget always produce the
//! same merge list.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_MARKER: &str = "</w>";
/// Default subword vocabulary budget for the similarity model.
pub const DEFAULT_VOCAB_SIZE: usize = 30_000;

/// A learned merge sequence.
#[derive(Debug, Clone)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    vocab_size_target: usize,
    marker: String,
    ranks: HashMap<(String, String), usize>,
    vocab: BTreeMap<String, usize>,
}

impl PartialEq for BpeModel {
    fn eq(&self, other: &Self) -> bool {
        self.merges == other.merges
            && self.vocab_size_target == other.vocab_size_target
            && self.marker == other.marker
    }
}

impl BpeModel {
    /// Builds a model from an explicit merge list.
    pub fn from_merges(
        merges: Vec<(String, String)>,
        vocab_size_target: usize,
        marker: impl Into<String>,
    ) -> Self {
        let marker = marker.into();
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, pair) in merges.iter().enumerate() {
            ranks.entry(pair.clone()).or_insert(rank);
        }
        // Base symbols first (sorted), then merge products in learned order.
        let produced: HashSet<String> = merges.iter().map(|(l, r)| format!("{l}{r}")).collect();
        let mut base: Vec<&String> = merges
            .iter()
            .flat_map(|(l, r)| [l, r])
            .filter(|s| !produced.contains(*s))
            .collect();
        base.sort();
        base.dedup();
        let mut vocab = BTreeMap::new();
        for sym in base {
            let id = vocab.len();
            vocab.entry(sym.clone()).or_insert(id);
        }
        for (l, r) in &merges {
            let id = vocab.len();
            vocab.entry(format!("{l}{r}")).or_insert(id);
        }
        Self {
            merges,
            vocab_size_target,
            marker,
            ranks,
            vocab,
        }
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn vocab_size_target(&self) -> usize {
        self.vocab_size_target
    }

    pub fn marker(&self) -> &str {
        &self.marker
    }

    /// Subword vocabulary implied by the merges: every symbol that takes part
    /// in a merge plus every merge product. Characters never merged are
    /// handled as single-character fallbacks.
    pub fn vocab(&self) -> &BTreeMap<String, usize> {
        &self.vocab
    }

    /// Segments a sentence into subword tokens.
    pub fn segment(&self, sentence: &str) -> Vec<String> {
        let mut out = Vec::new();
        for word in sentence.split_whitespace() {
            out.extend(self.segment_word(word));
        }
        out
    }

    fn segment_word(&self, word: &str) -> Vec<String> {
        let mut symbols = initial_symbols(word, &self.marker);
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())).copied())
                .min();
            let Some(rank) = best else { break };
            let (left, right) = &self.merges[rank];
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && &symbols[i] == left && &symbols[i + 1] == right {
                    merged.push(format!("{left}{right}"));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
        }
        symbols
    }

    /// Inverse of [`BpeModel::segment`] for this model's marker.
    pub fn detokenize<S: AsRef<str>>(&self, tokens: &[S]) -> String {
        detokenize_with(tokens, &self.marker)
    }

    /// Text form: a `bpe v1 <vocab_size>` header and one tab-separated merge per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("bpe v1 {}\n", self.vocab_size_target);
        for (l, r) in &self.merges {
            let _ = writeln!(out, "{l}\t{r}");
        }
        out
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "missing header"))?;
        let vocab_size_target = header
            .strip_prefix("bpe v1 ")
            .and_then(|n| n.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::parse(origin, 1, format!("bad header {header:?}")))?;
        let mut merges = Vec::new();
        for (i, line) in lines.enumerate() {
            let (l, r) = line
                .split_once('\t')
                .filter(|(l, r)| !l.is_empty() && !r.is_empty() && !r.contains('\t'))
                .ok_or_else(|| Error::parse(origin, i + 2, "expected \"left<TAB>right\""))?;
            merges.push((l.to_owned(), r.to_owned()));
        }
        Ok(Self::from_merges(merges, vocab_size_target, DEFAULT_MARKER))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

fn initial_symbols(word: &str, marker: &str) -> Vec<String> {
    let mut symbols: Vec<String> = word.chars().map(String::from).collect();
    if let Some(last) = symbols.last_mut() {
        last.push_str(marker);
    }
    symbols
}

/// Joins tokens back into whitespace-normalized text: a token ending in the
/// marker closes a word.
pub fn detokenize_with<S: AsRef<str>>(tokens: &[S], marker: &str) -> String {
    let mut out = String::new();
    for tok in tokens {
        let tok = tok.as_ref();
        match tok.strip_suffix(marker) {
            Some(stem) if !marker.is_empty() => {
                out.push_str(stem);
                out.push(' ');
            }
            _ => out.push_str(tok),
        }
    }
    if out.ends_with(' ') {
        out.pop();
    }
    out
}

pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    detokenize_with(tokens, DEFAULT_MARKER)
}

pub fn learn_bpe<S: AsRef<str>>(corpus: &[S], vocab_size: usize) -> Result<BpeModel> {
    learn_bpe_with_marker(corpus, vocab_size, DEFAULT_MARKER)
}

pub fn learn_bpe_with_marker<S: AsRef<str>>(
    corpus: &[S],
    vocab_size: usize,
    marker: &str,
) -> Result<BpeModel> {
    let mut word_counts: BTreeMap<&str, u64> = BTreeMap::new();
    for line in corpus {
        for w in line.as_ref().split_whitespace() {
            *word_counts.entry(w).or_default() += 1;
        }
    }
    if word_counts.is_empty() {
        return Err(Error::Empty("BPE training corpus"));
    }

    let mut words: Vec<(Vec<String>, u64)> = word_counts
        .into_iter()
        .map(|(w, c)| (initial_symbols(w, marker), c))
        .collect();
    let inventory: HashSet<&String> = words.iter().flat_map(|(s, _)| s.iter()).collect();
    let inventory_size = inventory.len();
    if vocab_size < inventory_size {
        return Err(Error::invalid(format!(
            "vocab_size {vocab_size} is below the character inventory size {inventory_size}"
        )));
    }
    let budget = vocab_size - inventory_size;

    type Pair = (String, String);
    let mut counts: HashMap<Pair, i64> = HashMap::new();
    let mut where_: HashMap<Pair, HashSet<usize>> = HashMap::new();
    for (idx, (syms, c)) in words.iter().enumerate() {
        for w in syms.windows(2) {
            let pair = (w[0].clone(), w[1].clone());
            *counts.entry(pair.clone()).or_default() += *c as i64;
            where_.entry(pair).or_default().insert(idx);
        }
    }
    let mut heap: BinaryHeap<(i64, Reverse<Pair>)> = counts
        .iter()
        .map(|(p, &c)| (c, Reverse(p.clone())))
        .collect();

    let mut merges: Vec<Pair> = Vec::with_capacity(budget);
    while merges.len() < budget {
        let Some((count, Reverse(pair))) = heap.pop() else { break };
        if count <= 0 || counts.get(&pair).copied() != Some(count) {
            continue;
        }
        let merged = format!("{}{}", pair.0, pair.1);
        let mut touched: HashSet<Pair> = HashSet::new();
        let mut affected: Vec<usize> = where_
            .get(&pair)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default();
        affected.sort_unstable();
        for idx in affected {
            let (syms, c) = &mut words[idx];
            let c = *c as i64;
            if !syms.windows(2).any(|w| w[0] == pair.0 && w[1] == pair.1) {
                continue;
            }
            for w in syms.windows(2) {
                let p = (w[0].clone(), w[1].clone());
                *counts.get_mut(&p).expect("counted pair") -= c;
                touched.insert(p);
            }
            let mut next = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == pair.0 && syms[i + 1] == pair.1 {
                    next.push(merged.clone());
                    i += 2;
                } else {
                    next.push(std::mem::take(&mut syms[i]));
                    i += 1;
                }
            }
            *syms = next;
            for w in syms.windows(2) {
                let p = (w[0].clone(), w[1].clone());
                *counts.entry(p.clone()).or_default() += c;
                where_.entry(p.clone()).or_default().insert(idx);
                touched.insert(p);
            }
        }
        for p in touched {
            let c = counts[&p];
            if c > 0 {
                heap.push((c, Reverse(p)));
            }
        }
        merges.push(pair);
    }

    Ok(BpeModel::from_merges(merges, vocab_size, marker))
}

/// Number of distinct initial symbols (code points, word-final ones carrying
/// the marker) in a corpus.
pub fn inventory_size<S: AsRef<str>>(corpus: &[S], marker: &str) -> usize {
    let mut seen = HashSet::new();
    for line in corpus {
        for w in line.as_ref().split_whitespace() {
            seen.extend(initial_symbols(w, marker));
        }
    }
    seen.len()
}
