//! Exact k-best enumeration for the position-wise model.
//!
//! The sequence score decomposes over positions, so the k best sequences are
//! found by a best-first walk over the Cartesian product of per-position
//! rankings. Each state is a vector of per-position ranks; successors bump the
//! rank of one position at or after the last bumped one, which reaches every
//! state exactly once.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::model::{sum_positions, ToyLexModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub tokens: Vec<String>,
    /// Model log-probability of the whole sequence.
    pub logprob: f64,
    /// Cost against the reference, filled in by scoring.
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NBestList {
    pub source: Vec<String>,
    pub reference: Vec<String>,
    /// Distinct candidates, best first, never containing the reference.
    pub candidates: Vec<Candidate>,
    /// Set when fewer than the requested number of sequences exist.
    pub exhausted: bool,
}

impl NBestList {
    pub fn costs(&self) -> Result<Vec<f64>> {
        self.candidates
            .iter()
            .map(|c| c.cost.ok_or(Error::invalid("n-best candidate has no cost")))
            .collect()
    }

    pub fn logprobs(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.logprob).collect()
    }
}

struct State {
    score: f64,
    ids: Vec<usize>,
    ranks: Vec<usize>,
    last: usize,
}

impl PartialEq for State {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for State {}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for State {
    // Higher score first; equal scores favour the lexicographically smaller ids.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.ids.cmp(&self.ids))
    }
}

/// Lazily yields target id sequences in descending log-probability order
/// (ties by ascending id sequence).
pub struct KBest {
    per_position: Vec<Vec<f64>>,
    order: Vec<Vec<usize>>,
    heap: BinaryHeap<State>,
}

impl KBest {
    pub fn new(model: &ToyLexModel, source_ids: &[usize]) -> Self {
        let per_position: Vec<Vec<f64>> = source_ids.iter().map(|&s| model.log_probs(s)).collect();
        let order: Vec<Vec<usize>> = per_position
            .iter()
            .map(|lp| {
                let mut idx: Vec<usize> = (0..lp.len()).collect();
                idx.sort_by(|&a, &b| lp[b].total_cmp(&lp[a]).then(a.cmp(&b)));
                idx
            })
            .collect();
        let mut heap = BinaryHeap::new();
        let ranks = vec![0; per_position.len()];
        let ids: Vec<usize> = order.iter().map(|o| o[0]).collect();
        heap.push(State {
            score: sum_positions(&per_position, &ids),
            ids,
            ranks,
            last: 0,
        });
        Self {
            per_position,
            order,
            heap,
        }
    }
}

impl Iterator for KBest {
    type Item = (Vec<usize>, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let state = self.heap.pop()?;
        for p in state.last..state.ranks.len() {
            let r = state.ranks[p] + 1;
            if r >= self.order[p].len() {
                continue;
            }
            let mut ranks = state.ranks.clone();
            ranks[p] = r;
            let mut ids = state.ids.clone();
            ids[p] = self.order[p][r];
            self.heap.push(State {
                score: sum_positions(&self.per_position, &ids),
                ids,
                ranks,
                last: p,
            });
        }
        Some((state.ids, state.score))
    }
}

/// The `k` most probable target sequences for `x`, skipping `reference`.
///
/// When fewer than `k` other sequences exist, all of them are returned and
/// `exhausted` is set.
pub fn nbest<S: AsRef<str>, T: AsRef<str>>(
    model: &ToyLexModel,
    x: &[S],
    reference: &[T],
    k: usize,
) -> Result<NBestList> {
    if k == 0 {
        return Err(Error::invalid("n-best size must be at least 1"));
    }
    let xs = model.source_ids(x)?;
    let ref_tokens: Vec<String> = reference.iter().map(|t| t.as_ref().to_owned()).collect();
    let mut candidates = Vec::with_capacity(k);
    let mut walk = KBest::new(model, &xs);
    while candidates.len() < k {
        let Some((ids, logprob)) = walk.next() else { break };
        let tokens = model.target_tokens(&ids);
        if tokens == ref_tokens {
            continue;
        }
        candidates.push(Candidate {
            tokens,
            logprob,
            cost: None,
        });
    }
    Ok(NBestList {
        source: x.iter().map(|t| t.as_ref().to_owned()).collect(),
        reference: ref_tokens,
        exhausted: candidates.len() < k,
        candidates,
    })
}

/// Most probable output: the per-position argmax.
pub fn decode<S: AsRef<str>>(model: &ToyLexModel, x: &[S]) -> Result<Vec<String>> {
    let xs = model.source_ids(x)?;
    let (ids, _) = KBest::new(model, &xs).next().expect("k-best walk yields a first state");
    Ok(model.target_tokens(&ids))
}
