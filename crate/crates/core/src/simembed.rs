//! The SIM sentence encoder: the mean of subword embeddings, compared by
//! cosine, trained with a margin loss against negatives mined from a
//! mega-batch.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const DEFAULT_DIM: usize = 300;
const INIT_RANGE: f64 = 0.05;

/// Token embeddings; the parameters of the sentence encoder.
///
/// Always carries an `<unk>` row that absorbs tokens outside the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    unk: usize,
}

impl EmbeddingTable {
    /// Builds a table from explicit rows. An `<unk>` row of zeros is appended
    /// when none is supplied.
    pub fn from_rows(rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dim = rows
            .first()
            .map(|(_, v)| v.len())
            .ok_or(Error::Empty("embedding rows"))?;
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        let mut table = Self {
            dim,
            tokens: Vec::with_capacity(rows.len() + 1),
            index: HashMap::with_capacity(rows.len() + 1),
            data: Vec::with_capacity((rows.len() + 1) * dim),
            unk: 0,
        };
        for (tok, v) in rows {
            if v.len() != dim {
                return Err(Error::LengthMismatch {
                    what: "embedding row dimension",
                    left: v.len(),
                    right: dim,
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("embedding for {tok:?}")));
            }
            if table.index.contains_key(&tok) {
                return Err(Error::invalid(format!("duplicate embedding token {tok:?}")));
            }
            table.index.insert(tok.clone(), table.tokens.len());
            table.tokens.push(tok);
            table.data.extend(v);
        }
        table.unk = match table.index.get(UNK) {
            Some(&id) => id,
            None => {
                table.index.insert(UNK.to_owned(), table.tokens.len());
                table.tokens.push(UNK.to_owned());
                table.data.extend(std::iter::repeat_n(0.0, dim));
                table.tokens.len() - 1
            }
        };
        Ok(table)
    }

    /// Uniform initialization in [-0.05, 0.05] for every token plus `<unk>`.
    pub fn random<S: AsRef<str>>(vocab: &[S], dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(vocab.len() + 1);
        let mut seen = std::collections::HashSet::new();
        for tok in vocab.iter().map(AsRef::as_ref).chain(std::iter::once(UNK)) {
            if !seen.insert(tok.to_owned()) {
                continue;
            }
            let v = (0..dim)
                .map(|_| rng.gen_range(-INIT_RANGE..=INIT_RANGE))
                .collect();
            rows.push((tok.to_owned(), v));
        }
        Self::from_rows(rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of rows, `<unk>` included.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn unk_id(&self) -> usize {
        self.unk
    }

    /// Row id for a token, falling back to `<unk>`.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(self.unk)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn row_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.data[id * self.dim..(id + 1) * self.dim]
    }

    /// Multiplies every component by `c`.
    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }

    /// Mean of the rows for `ids`.
    pub fn encode_ids(&self, ids: &[usize]) -> Result<Vec<f64>> {
        if ids.is_empty() {
            return Err(Error::Empty("token sequence to encode"));
        }
        let mut acc = vec![0.0; self.dim];
        for &id in ids {
            for (a, x) in acc.iter_mut().zip(self.row(id)) {
                *a += x;
            }
        }
        let n = ids.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(acc)
    }
}

/// Averages the token embeddings of a sentence.
pub fn encode<S: AsRef<str>>(table: &EmbeddingTable, tokens: &[S]) -> Result<Vec<f64>> {
    table.encode_ids(&table.ids(tokens))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine of two vectors; `sides` names them in the zero-norm error.
pub fn cosine_named(a: &[f64], b: &[f64], sides: (&'static str, &'static str)) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 {
        return Err(Error::ZeroNorm(sides.0));
    }
    if nb == 0.0 {
        return Err(Error::ZeroNorm(sides.1));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    cosine_named(a, b, ("first", "second"))
}

/// SIM: cosine between the averaged encodings of `r` and `h`.
pub fn sim<S: AsRef<str>, T: AsRef<str>>(
    table: &EmbeddingTable,
    r: &[S],
    h: &[T],
) -> Result<f64> {
    let er = encode(table, r).map_err(|_| Error::Empty("reference token sequence"))?;
    let eh = encode(table, h).map_err(|_| Error::Empty("hypothesis token sequence"))?;
    cosine_named(&er, &eh, ("reference", "hypothesis"))
}

/// A paraphrase pair `(s, s')`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphrasePair {
    pub s: Vec<String>,
    pub s_prime: Vec<String>,
}

impl ParaphrasePair {
    pub fn new(s: Vec<String>, s_prime: Vec<String>) -> Result<Self> {
        if s.is_empty() || s_prime.is_empty() {
            return Err(Error::Empty("paraphrase pair side"));
        }
        Ok(Self { s, s_prime })
    }

    fn swapped(&self) -> Self {
        Self {
            s: self.s_prime.clone(),
            s_prime: self.s.clone(),
        }
    }
}

pub const DEFAULT_MARGIN: f64 = 0.4;

fn check_negative(pair: &ParaphrasePair, t: &[String]) -> Result<()> {
    if t == pair.s.as_slice() || t == pair.s_prime.as_slice() {
        return Err(Error::invalid(
            "negative example must differ from both sides of the pair",
        ));
    }
    Ok(())
}

/// `max(0, δ − cos(g(s), g(s′)) + cos(g(s), g(t)))`.
pub fn margin_loss(
    table: &EmbeddingTable,
    pair: &ParaphrasePair,
    t: &[String],
    delta: f64,
) -> Result<f64> {
    check_negative(pair, t)?;
    let ids = TripleIds::new(table, &pair.s, &pair.s_prime, t);
    Ok(margin_terms(table, &ids)?.loss(delta))
}

/// Gradient of [`margin_loss`] with respect to each embedding row it touches.
/// Rows absent from the map have zero gradient.
pub type SparseGrad = BTreeMap<usize, Vec<f64>>;

pub fn margin_loss_grad(
    table: &EmbeddingTable,
    pair: &ParaphrasePair,
    t: &[String],
    delta: f64,
) -> Result<SparseGrad> {
    check_negative(pair, t)?;
    let ids = TripleIds::new(table, &pair.s, &pair.s_prime, t);
    let mut grad = SparseGrad::new();
    let terms = margin_terms(table, &ids)?;
    terms.accumulate_grad(&ids, delta, 1.0, &mut grad);
    Ok(grad)
}

struct TripleIds {
    s: Vec<usize>,
    sp: Vec<usize>,
    t: Vec<usize>,
}

impl TripleIds {
    fn new(table: &EmbeddingTable, s: &[String], sp: &[String], t: &[String]) -> Self {
        Self {
            s: table.ids(s),
            sp: table.ids(sp),
            t: table.ids(t),
        }
    }
}

struct MarginTerms {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    na: f64,
    nb: f64,
    nc: f64,
    cos_ab: f64,
    cos_ac: f64,
}

fn margin_terms(table: &EmbeddingTable, ids: &TripleIds) -> Result<MarginTerms> {
    let a = table.encode_ids(&ids.s)?;
    let b = table.encode_ids(&ids.sp)?;
    let c = table.encode_ids(&ids.t)?;
    let (na, nb, nc) = (norm(&a), norm(&b), norm(&c));
    if na == 0.0 {
        return Err(Error::ZeroNorm("anchor"));
    }
    if nb == 0.0 {
        return Err(Error::ZeroNorm("paraphrase"));
    }
    if nc == 0.0 {
        return Err(Error::ZeroNorm("negative"));
    }
    let cos_ab = dot(&a, &b) / (na * nb);
    let cos_ac = dot(&a, &c) / (na * nc);
    Ok(MarginTerms {
        a,
        b,
        c,
        na,
        nb,
        nc,
        cos_ab,
        cos_ac,
    })
}

impl MarginTerms {
    fn loss(&self, delta: f64) -> f64 {
        (delta - self.cos_ab + self.cos_ac).max(0.0)
    }

    /// Adds `weight * dℓ/d row` into `grad`.
    fn accumulate_grad(&self, ids: &TripleIds, delta: f64, weight: f64, grad: &mut SparseGrad) {
        if self.loss(delta) <= 0.0 {
            return;
        }
        let dim = self.a.len();
        // d cos(x, y) / dx = y / (|x||y|) − cos(x, y) · x / |x|²
        let mut da = vec![0.0; dim];
        let mut db = vec![0.0; dim];
        let mut dc = vec![0.0; dim];
        for k in 0..dim {
            let (a, b, c) = (self.a[k], self.b[k], self.c[k]);
            let dcos_ab_da = b / (self.na * self.nb) - self.cos_ab * a / (self.na * self.na);
            let dcos_ab_db = a / (self.na * self.nb) - self.cos_ab * b / (self.nb * self.nb);
            let dcos_ac_da = c / (self.na * self.nc) - self.cos_ac * a / (self.na * self.na);
            let dcos_ac_dc = a / (self.na * self.nc) - self.cos_ac * c / (self.nc * self.nc);
            da[k] = -dcos_ab_da + dcos_ac_da;
            db[k] = -dcos_ab_db;
            dc[k] = dcos_ac_dc;
        }
        for (seq, d) in [(&ids.s, &da), (&ids.sp, &db), (&ids.t, &dc)] {
            let w = weight / seq.len() as f64;
            for &id in seq {
                let g = grad.entry(id).or_insert_with(|| vec![0.0; dim]);
                for (gk, dk) in g.iter_mut().zip(d) {
                    *gk += w * dk;
                }
            }
        }
    }
}

/// For each pair, the index `j != i` whose `s′_j` is most similar to `s_i`
/// under the current table (lowest index on ties). Candidates whose tokens
/// equal either side of pair `i` are skipped; `None` means nothing remained.
pub fn select_negatives(
    table: &EmbeddingTable,
    megabatch: &[ParaphrasePair],
) -> Result<Vec<Option<usize>>> {
    if megabatch.len() < 2 {
        return Err(Error::invalid(
            "negative mining needs a mega-batch of at least 2 pairs",
        ));
    }
    let anchors: Vec<Vec<f64>> = megabatch
        .iter()
        .map(|p| encode(table, &p.s))
        .collect::<Result<_>>()?;
    let candidates: Vec<Vec<f64>> = megabatch
        .iter()
        .map(|p| encode(table, &p.s_prime))
        .collect::<Result<_>>()?;
    let cand_norms: Vec<f64> = candidates.iter().map(|c| norm(c)).collect();

    (0..megabatch.len())
        .into_par_iter()
        .map(|i| {
            let na = norm(&anchors[i]);
            if na == 0.0 {
                return Err(Error::ZeroNorm("anchor"));
            }
            let mut best: Option<(usize, f64)> = None;
            for (j, cand) in candidates.iter().enumerate() {
                if j == i
                    || megabatch[j].s_prime == megabatch[i].s
                    || megabatch[j].s_prime == megabatch[i].s_prime
                {
                    continue;
                }
                if cand_norms[j] == 0.0 {
                    return Err(Error::ZeroNorm("negative candidate"));
                }
                let c = dot(&anchors[i], cand) / (na * cand_norms[j]);
                if best.is_none_or(|(_, b)| c > b) {
                    best = Some((j, c));
                }
            }
            Ok(best.map(|(j, _)| j))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrainConfig {
    pub margin: f64,
    pub minibatch_size: usize,
    /// Mini-batches per mega-batch.
    pub megabatch_factor: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Also train with `s′` as the anchor and negatives mined from the `s` side.
    pub bidirectional: bool,
}

impl Default for SimTrainConfig {
    fn default() -> Self {
        Self {
            margin: DEFAULT_MARGIN,
            minibatch_size: 64,
            megabatch_factor: 4,
            learning_rate: 0.05,
            epochs: 10,
            seed: 1,
            bidirectional: false,
        }
    }
}

impl SimTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin < 2.0) {
            return Err(Error::invalid(format!(
                "margin {} outside (0, 2)",
                self.margin
            )));
        }
        if self.minibatch_size == 0 || self.megabatch_factor == 0 {
            return Err(Error::invalid(
                "minibatch_size and megabatch_factor must be at least 1",
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be a non-negative real"));
        }
        Ok(())
    }

    fn megabatch_size(&self) -> usize {
        self.minibatch_size * self.megabatch_factor
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrainLog {
    /// Mean margin loss before training (entry 0) and after each epoch.
    pub epoch_loss: Vec<f64>,
}

/// Splits `0..n` into consecutive chunks of `size`, folding a trailing
/// singleton into the previous chunk so every chunk can mine a negative.
fn chunk_bounds(n: usize, size: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + size).min(n);
        out.push((start, end));
        start = end;
    }
    if out.len() > 1 && out.last().is_some_and(|(s, e)| e - s == 1) {
        let (_, e) = out.pop().unwrap();
        out.last_mut().unwrap().1 = e;
    }
    out
}

struct Example {
    ids: TripleIds,
}

fn mine_examples(
    table: &EmbeddingTable,
    megabatch: &[ParaphrasePair],
    bidirectional: bool,
) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    let negs = select_negatives(table, megabatch)?;
    for (p, n) in megabatch.iter().zip(&negs) {
        if let Some(j) = n {
            out.push(Example {
                ids: TripleIds::new(table, &p.s, &p.s_prime, &megabatch[*j].s_prime),
            });
        }
    }
    if bidirectional {
        let flipped: Vec<ParaphrasePair> = megabatch.iter().map(ParaphrasePair::swapped).collect();
        let negs = select_negatives(table, &flipped)?;
        for (p, n) in flipped.iter().zip(&negs) {
            if let Some(j) = n {
                out.push(Example {
                    ids: TripleIds::new(table, &p.s, &p.s_prime, &flipped[*j].s_prime),
                });
            }
        }
    }
    Ok(out)
}

/// Mean margin loss over the pairs in their given order, mining negatives
/// within consecutive mega-batches. Depends only on the table, so it serves
/// as the per-epoch training log.
pub fn mean_margin_loss(
    table: &EmbeddingTable,
    pairs: &[ParaphrasePair],
    config: &SimTrainConfig,
) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (s, e) in chunk_bounds(pairs.len(), config.megabatch_size().max(2)) {
        for ex in mine_examples(table, &pairs[s..e], config.bidirectional)? {
            total += margin_terms(table, &ex.ids)?.loss(config.margin);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::invalid("no pair has a usable negative example"));
    }
    let mean = total / count as f64;
    if !mean.is_finite() {
        return Err(Error::NonFinite("mean margin loss".into()));
    }
    Ok(mean)
}

/// Trains the embeddings with plain SGD on the margin loss.
///
/// Every epoch shuffles the pairs, cuts them into mega-batches, mines one
/// negative per pair with the table frozen at the start of the mega-batch and
/// then takes one SGD step per mini-batch.
pub fn train_sim(
    table: &EmbeddingTable,
    pairs: &[ParaphrasePair],
    config: &SimTrainConfig,
) -> Result<(EmbeddingTable, SimTrainLog)> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Empty("paraphrase pairs"));
    }
    if pairs.len() < 2 {
        return Err(Error::invalid("training needs at least 2 pairs to mine negatives"));
    }
    let mut table = table.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut log = vec![mean_margin_loss(&table, pairs, config)?];
    let mut order: Vec<usize> = (0..pairs.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let shuffled: Vec<ParaphrasePair> = order.iter().map(|&i| pairs[i].clone()).collect();
        for (ms, me) in chunk_bounds(shuffled.len(), config.megabatch_size().max(2)) {
            let examples = mine_examples(&table, &shuffled[ms..me], config.bidirectional)?;
            for batch in examples.chunks(config.minibatch_size) {
                let mut grad = SparseGrad::new();
                let w = 1.0 / batch.len() as f64;
                for ex in batch {
                    let terms = margin_terms(&table, &ex.ids)?;
                    let loss = terms.loss(config.margin);
                    if !loss.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "margin loss in epoch {}",
                            epoch + 1
                        )));
                    }
                    terms.accumulate_grad(&ex.ids, config.margin, w, &mut grad);
                }
                for (id, g) in grad {
                    for (x, gk) in table.row_mut(id).iter_mut().zip(g) {
                        *x -= config.learning_rate * gk;
                    }
                }
            }
        }
        let loss = mean_margin_loss(&table, pairs, config)?;
        log.push(loss);
    }
    Ok((table, SimTrainLog { epoch_loss: log }))
}
