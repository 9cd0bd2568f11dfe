//! Expected risk over an n-best list and the weighted fine-tuning objective.

use super::model::{seq_logprob_grad, seq_logprob_ids, token_ls_ids, ToyLexModel};
use super::nbest::NBestList;
use crate::error::{Error, Result};

/// Softmax over candidate log-probabilities (the model distribution
/// renormalized to the candidate set).
pub fn renormalize(logprobs: &[f64]) -> Vec<f64> {
    let max = logprobs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logprobs.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn expected(costs: &[f64], logprobs: &[f64]) -> Result<f64> {
    if costs.is_empty() {
        return Err(Error::Empty("n-best candidates"));
    }
    Ok(renormalize(logprobs)
        .iter()
        .zip(costs)
        .map(|(p, c)| p * c)
        .sum())
}

/// `Σ_u cost(u) · p(u|x) / Σ_u′ p(u′|x)` over the listed candidates.
pub fn risk_loss(list: &NBestList) -> Result<f64> {
    expected(&list.costs()?, &list.logprobs())
}

/// `∂L/∂logprob_i = p̃_i (cost_i − L)`.
pub fn risk_grad(list: &NBestList) -> Result<Vec<f64>> {
    let costs = list.costs()?;
    let lps = list.logprobs();
    let loss = expected(&costs, &lps)?;
    Ok(renormalize(&lps)
        .iter()
        .zip(&costs)
        .map(|(p, c)| p * (c - loss))
        .collect())
}

/// One fine-tuning example: a source, its reference and a scored n-best list
/// whose candidate set stays fixed while the parameters move.
#[derive(Debug, Clone)]
pub struct RiskExample {
    pub source_ids: Vec<usize>,
    pub reference_ids: Vec<usize>,
    pub candidate_ids: Vec<Vec<usize>>,
    pub costs: Vec<f64>,
}

impl RiskExample {
    pub fn new(model: &ToyLexModel, list: &NBestList) -> Result<Self> {
        let candidate_ids = list
            .candidates
            .iter()
            .map(|c| model.target_ids(&c.tokens))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            source_ids: model.source_ids(&list.source)?,
            reference_ids: model.target_ids(&list.reference)?,
            candidate_ids,
            costs: list.costs()?,
        })
    }

    /// Candidate log-probabilities under the model's current parameters.
    pub fn logprobs(&self, model: &ToyLexModel) -> Vec<f64> {
        self.candidate_ids
            .iter()
            .map(|u| seq_logprob_ids(model, &self.source_ids, u))
            .collect()
    }

    pub fn risk(&self, model: &ToyLexModel) -> Result<f64> {
        expected(&self.costs, &self.logprobs(model))
    }

    /// Adds `weight · ∂risk/∂theta` to `grad` and returns the risk.
    pub fn risk_with_grad(&self, model: &ToyLexModel, weight: f64, grad: &mut [f64]) -> Result<f64> {
        let lps = self.logprobs(model);
        let loss = expected(&self.costs, &lps)?;
        for ((p, c), u) in renormalize(&lps).iter().zip(&self.costs).zip(&self.candidate_ids) {
            let d = p * (c - loss);
            if d != 0.0 {
                seq_logprob_grad(model, &self.source_ids, u, weight * d, grad);
            }
        }
        Ok(loss)
    }

    pub fn token_ls(&self, model: &ToyLexModel, epsilon: f64) -> f64 {
        token_ls_ids(model, &self.source_ids, &self.reference_ids, epsilon, 0.0, None)
    }
}

/// Gradient of the risk with respect to `theta` with the candidate set held fixed.
pub fn risk_grad_theta(model: &ToyLexModel, example: &RiskExample) -> Result<Vec<f64>> {
    let mut g = vec![0.0; model.theta().len()];
    example.risk_with_grad(model, 1.0, &mut g)?;
    Ok(g)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma {gamma} outside [0, 1]")));
    }
    Ok(())
}

/// Batch mean of `γ·L_TokLS + (1 − γ)·L_Risk`.
pub fn weighted_loss(
    model: &ToyLexModel,
    batch: &[RiskExample],
    gamma: f64,
    epsilon: f64,
) -> Result<f64> {
    check_gamma(gamma)?;
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut total = 0.0;
    for ex in batch {
        total += gamma * ex.token_ls(model, epsilon) + (1.0 - gamma) * ex.risk(model)?;
    }
    Ok(total / batch.len() as f64)
}

/// [`weighted_loss`] together with its gradient with respect to `theta`.
pub fn weighted_loss_grad(
    model: &ToyLexModel,
    batch: &[RiskExample],
    gamma: f64,
    epsilon: f64,
) -> Result<(f64, Vec<f64>)> {
    check_gamma(gamma)?;
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let n = batch.len() as f64;
    let mut grad = vec![0.0; model.theta().len()];
    let mut total = 0.0;
    for ex in batch {
        let tok = token_ls_ids(
            model,
            &ex.source_ids,
            &ex.reference_ids,
            epsilon,
            gamma / n,
            Some(&mut grad),
        );
        let risk = ex.risk_with_grad(model, (1.0 - gamma) / n, &mut grad)?;
        total += gamma * tok + (1.0 - gamma) * risk;
    }
    Ok((total / n, grad))
}
