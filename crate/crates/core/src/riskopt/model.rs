use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position-wise lexical translation model: output position `j` is drawn from
/// `softmax(theta[x_j])`, so target length always equals source length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct ToyLexModel {
    source_vocab: Vec<String>,
    target_vocab: Vec<String>,
    /// Row-major `|source| × |target|` scores.
    theta: Vec<f64>,
    source_index: HashMap<String, usize>,
    target_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    source_vocab: Vec<String>,
    target_vocab: Vec<String>,
    theta: Vec<f64>,
}

impl TryFrom<ModelRepr> for ToyLexModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        let mut m = ToyLexModel::new(r.source_vocab, r.target_vocab)?;
        if r.theta.len() != m.theta.len() {
            return Err(Error::LengthMismatch {
                what: "theta size vs vocabularies",
                left: r.theta.len(),
                right: m.theta.len(),
            });
        }
        if r.theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("model scores".into()));
        }
        m.theta = r.theta;
        Ok(m)
    }
}

impl From<ToyLexModel> for ModelRepr {
    fn from(m: ToyLexModel) -> Self {
        ModelRepr {
            source_vocab: m.source_vocab,
            target_vocab: m.target_vocab,
            theta: m.theta,
        }
    }
}

fn index_of(vocab: &[String], what: &'static str) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(vocab.len());
    for (i, t) in vocab.iter().enumerate() {
        if index.insert(t.clone(), i).is_some() {
            return Err(Error::invalid(format!("duplicate {what} token {t:?}")));
        }
    }
    Ok(index)
}

impl ToyLexModel {
    /// A model with all-zero scores (uniform output distributions).
    pub fn new(source_vocab: Vec<String>, target_vocab: Vec<String>) -> Result<Self> {
        if source_vocab.is_empty() || target_vocab.is_empty() {
            return Err(Error::Empty("model vocabulary"));
        }
        let source_index = index_of(&source_vocab, "source")?;
        let target_index = index_of(&target_vocab, "target")?;
        Ok(Self {
            theta: vec![0.0; source_vocab.len() * target_vocab.len()],
            source_vocab,
            target_vocab,
            source_index,
            target_index,
        })
    }

    /// Zero-initialized model over the sorted vocabularies of a parallel corpus.
    pub fn for_corpus(pairs: &[(Vec<String>, Vec<String>)]) -> Result<Self> {
        let mut src = BTreeSet::new();
        let mut tgt = BTreeSet::new();
        for (x, u) in pairs {
            src.extend(x.iter().cloned());
            tgt.extend(u.iter().cloned());
        }
        Self::new(src.into_iter().collect(), tgt.into_iter().collect())
    }

    pub fn source_vocab(&self) -> &[String] {
        &self.source_vocab
    }

    pub fn target_vocab(&self) -> &[String] {
        &self.target_vocab
    }

    pub fn n_target(&self) -> usize {
        self.target_vocab.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn row(&self, src: usize) -> &[f64] {
        let v = self.n_target();
        &self.theta[src * v..(src + 1) * v]
    }

    pub fn row_mut(&mut self, src: usize) -> &mut [f64] {
        let v = self.n_target();
        &mut self.theta[src * v..(src + 1) * v]
    }

    pub fn source_ids<S: AsRef<str>>(&self, x: &[S]) -> Result<Vec<usize>> {
        x.iter()
            .map(|t| {
                self.source_index
                    .get(t.as_ref())
                    .copied()
                    .ok_or_else(|| Error::UnknownToken {
                        token: t.as_ref().to_owned(),
                        vocab: "source",
                    })
            })
            .collect()
    }

    pub fn target_ids<S: AsRef<str>>(&self, u: &[S]) -> Result<Vec<usize>> {
        u.iter()
            .map(|t| {
                self.target_index
                    .get(t.as_ref())
                    .copied()
                    .ok_or_else(|| Error::UnknownToken {
                        token: t.as_ref().to_owned(),
                        vocab: "target",
                    })
            })
            .collect()
    }

    pub fn target_tokens(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.target_vocab[i].clone()).collect()
    }

    /// Log-softmax of one source row.
    pub fn log_probs(&self, src: usize) -> Vec<f64> {
        log_softmax(self.row(src))
    }

    pub fn probs(&self, src: usize) -> Vec<f64> {
        self.log_probs(src).into_iter().map(f64::exp).collect()
    }
}

pub(crate) fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    row.iter().map(|&z| z - lse).collect()
}

fn check_aligned(x: usize, u: usize) -> Result<()> {
    if x != u {
        return Err(Error::LengthMismatch {
            what: "target length vs source length",
            left: u,
            right: x,
        });
    }
    Ok(())
}

/// Sum of per-position log-probabilities, accumulated left to right.
pub(crate) fn sum_positions(per_position: &[Vec<f64>], u: &[usize]) -> f64 {
    let mut total = 0.0;
    for (lp, &t) in per_position.iter().zip(u) {
        total += lp[t];
    }
    total
}

/// `log p(u | x) = Σ_j log softmax(theta[x_j])[u_j]`.
pub fn seq_logprob<S: AsRef<str>, T: AsRef<str>>(
    model: &ToyLexModel,
    x: &[S],
    u: &[T],
) -> Result<f64> {
    check_aligned(x.len(), u.len())?;
    let xs = model.source_ids(x)?;
    let us = model.target_ids(u)?;
    Ok(seq_logprob_ids(model, &xs, &us))
}

pub(crate) fn seq_logprob_ids(model: &ToyLexModel, xs: &[usize], us: &[usize]) -> f64 {
    let per: Vec<Vec<f64>> = xs.iter().map(|&s| model.log_probs(s)).collect();
    sum_positions(&per, us)
}

/// Cross-entropy against `(1 − ε)·one-hot + ε·uniform`, summed over positions.
pub fn token_ls_loss<S: AsRef<str>, T: AsRef<str>>(
    model: &ToyLexModel,
    x: &[S],
    u_star: &[T],
    epsilon: f64,
) -> Result<f64> {
    check_aligned(x.len(), u_star.len())?;
    let xs = model.source_ids(x)?;
    let us = model.target_ids(u_star)?;
    Ok(token_ls_ids(model, &xs, &us, epsilon, 0.0, None))
}

/// Label-smoothed loss; when `grad` is given, adds `weight · ∂loss/∂theta` to it.
pub(crate) fn token_ls_ids(
    model: &ToyLexModel,
    xs: &[usize],
    us: &[usize],
    epsilon: f64,
    weight: f64,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let v = model.n_target();
    let uniform = epsilon / v as f64;
    let mut loss = 0.0;
    for (&s, &t) in xs.iter().zip(us) {
        let lp = model.log_probs(s);
        let mut pos = 0.0;
        for (k, &l) in lp.iter().enumerate() {
            let q = if k == t { 1.0 - epsilon + uniform } else { uniform };
            pos -= q * l;
        }
        loss += pos;
        if let Some(g) = grad.as_deref_mut() {
            let row = &mut g[s * v..(s + 1) * v];
            for (k, &l) in lp.iter().enumerate() {
                let q = if k == t { 1.0 - epsilon + uniform } else { uniform };
                row[k] += weight * (l.exp() - q);
            }
        }
    }
    loss
}

/// Adds `weight · ∂ log p(u|x) / ∂theta` to `grad`.
pub(crate) fn seq_logprob_grad(
    model: &ToyLexModel,
    xs: &[usize],
    us: &[usize],
    weight: f64,
    grad: &mut [f64],
) {
    let v = model.n_target();
    for (&s, &t) in xs.iter().zip(us) {
        let p = model.probs(s);
        let row = &mut grad[s * v..(s + 1) * v];
        for (k, pk) in p.iter().enumerate() {
            row[k] -= weight * pk;
        }
        row[t] += weight;
    }
}
