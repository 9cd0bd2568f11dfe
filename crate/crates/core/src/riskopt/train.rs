//! Training loops: label-smoothed MLE pre-training and minimum-risk
//! fine-tuning, plus the n-best size sweep.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{token_ls_ids, ToyLexModel};
use super::nbest::{decode, nbest};
use super::objective::{renormalize, weighted_loss_grad, RiskExample};
use super::optim::Nesterov;
use crate::error::{Error, Result};
use crate::metrics::{corpus_bleu, CostKind, SimileScorer};

/// A tokenized (source, reference) pair.
pub type SentencePair = (Vec<String>, Vec<String>);

pub const GAMMA_GRID: [f64; 3] = [0.2, 0.3, 0.4];

/// Learning rates for every epoch: `epochs` at the base rate, then (when
/// annealing) one epoch per tenfold reduction while the rate stays at or
/// above the floor.
pub fn lr_schedule(base: f64, epochs: usize, anneal: bool, factor: f64, floor: f64) -> Vec<f64> {
    let mut out = vec![base; epochs];
    if anneal && base > 0.0 && factor > 1.0 {
        let mut lr = base / factor;
        while lr >= floor {
            out.push(lr);
            lr /= factor;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleConfig {
    pub epsilon: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub anneal: bool,
    pub anneal_factor: f64,
    pub anneal_floor: f64,
    pub seed: u64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            learning_rate: 0.25,
            momentum: 0.99,
            clip_norm: 0.1,
            epochs: 200,
            batch_size: 16,
            anneal: true,
            anneal_factor: 10.0,
            anneal_floor: 1e-4,
            seed: 1,
        }
    }
}

fn validate_common(
    epsilon: f64,
    lr: f64,
    momentum: f64,
    clip: f64,
    batch: usize,
    factor: f64,
    floor: f64,
) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon {epsilon} outside [0, 1]")));
    }
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::invalid("learning rate must be a non-negative real"));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::invalid(format!("momentum {momentum} outside [0, 1)")));
    }
    if !(clip >= 0.0 && clip.is_finite()) {
        return Err(Error::invalid("clip norm must be non-negative"));
    }
    if batch == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if factor <= 1.0 || floor <= 0.0 {
        return Err(Error::invalid(
            "anneal factor must exceed 1 and the floor must be positive",
        ));
    }
    Ok(())
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        validate_common(
            self.epsilon,
            self.learning_rate,
            self.momentum,
            self.clip_norm,
            self.batch_size,
            self.anneal_factor,
            self.anneal_floor,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleEpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: ToyLexModel,
    pub best_epoch: usize,
    pub log: Vec<MleEpochLog>,
}

fn to_ids(model: &ToyLexModel, pairs: &[SentencePair]) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    pairs
        .iter()
        .map(|(x, u)| {
            if x.len() != u.len() {
                return Err(Error::LengthMismatch {
                    what: "reference length vs source length",
                    left: u.len(),
                    right: x.len(),
                });
            }
            Ok((model.source_ids(x)?, model.target_ids(u)?))
        })
        .collect()
}

fn mean_token_ls(model: &ToyLexModel, data: &[(Vec<usize>, Vec<usize>)], epsilon: f64) -> f64 {
    let total: f64 = data
        .iter()
        .map(|(x, u)| token_ls_ids(model, x, u, epsilon, 0.0, None))
        .sum();
    total / data.len().max(1) as f64
}

/// Label-smoothed maximum-likelihood training with Nesterov momentum.
pub fn mle_train(
    model: &ToyLexModel,
    train: &[SentencePair],
    valid: &[SentencePair],
    config: &MleConfig,
) -> Result<MleResult> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    let train_ids = to_ids(model, train)?;
    let valid_ids = if valid.is_empty() {
        train_ids.clone()
    } else {
        to_ids(model, valid)?
    };
    let mut model = model.clone();
    let mut opt = Nesterov::new(model.theta().len(), config.momentum, config.clip_norm);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let schedule = lr_schedule(
        config.learning_rate,
        config.epochs,
        config.anneal,
        config.anneal_factor,
        config.anneal_floor,
    );

    let val0 = mean_token_ls(&model, &valid_ids, config.epsilon);
    let mut log = vec![MleEpochLog {
        epoch: 0,
        lr: config.learning_rate,
        train_loss: mean_token_ls(&model, &train_ids, config.epsilon),
        val_loss: val0,
    }];
    let mut best = (val0, 0, model.clone());
    let mut order: Vec<usize> = (0..train_ids.len()).collect();

    for (e, &lr) in schedule.iter().enumerate() {
        order.shuffle(&mut rng);
        let mut train_total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let n = batch.len() as f64;
            let mut grad = vec![0.0; model.theta().len()];
            for &i in batch {
                let (x, u) = &train_ids[i];
                train_total += token_ls_ids(&model, x, u, config.epsilon, 1.0 / n, Some(&mut grad));
            }
            opt.step(model.theta_mut(), &grad, lr)?;
        }
        let val = mean_token_ls(&model, &valid_ids, config.epsilon);
        if !val.is_finite() {
            return Err(Error::NonFinite(format!("validation loss at epoch {}", e + 1)));
        }
        log.push(MleEpochLog {
            epoch: e + 1,
            lr,
            train_loss: train_total / train_ids.len() as f64,
            val_loss: val,
        });
        if val < best.0 {
            best = (val, e + 1, model.clone());
        }
    }
    Ok(MleResult {
        model: best.2,
        best_epoch: best.1,
        log,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTrainConfig {
    /// Weight on the token-level loss; `1 − gamma` goes to the risk.
    pub gamma: f64,
    pub epsilon: f64,
    /// n-best list size.
    pub k: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub clip_norm: f64,
    pub anneal: bool,
    pub anneal_factor: f64,
    pub anneal_floor: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub cost_kind: CostKind,
    pub seed: u64,
}

impl Default for RiskTrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.3,
            epsilon: 0.1,
            k: 8,
            learning_rate: 0.25,
            momentum: 0.99,
            clip_norm: 0.1,
            anneal: true,
            anneal_factor: 10.0,
            anneal_floor: 1e-4,
            epochs: 10,
            batch_size: 16,
            cost_kind: CostKind::SimileCost,
            seed: 1,
        }
    }
}

impl RiskTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        validate_common(
            self.epsilon,
            self.learning_rate,
            self.momentum,
            self.clip_norm,
            self.batch_size,
            self.anneal_factor,
            self.anneal_floor,
        )
    }

    pub fn schedule(&self) -> Vec<f64> {
        lr_schedule(
            self.learning_rate,
            self.epochs,
            self.anneal,
            self.anneal_factor,
            self.anneal_floor,
        )
    }
}

/// One row of the fine-tuning log (epoch 0 is the starting model).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Validation expected cost under `1 − BLEU`.
    pub expected_bleu_cost: f64,
    /// Validation expected cost under `1 − SimiLe`.
    pub expected_simile_cost: f64,
    pub val_weighted_loss: f64,
}

pub const RISK_LOG_HEADER: &str = "epoch,lr,expected_bleu_cost,expected_simile_cost,val_weighted_loss";

pub fn risk_log_csv(log: &[RiskEpochLog]) -> String {
    let mut out = format!("{RISK_LOG_HEADER}\n");
    for r in log {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch, r.lr, r.expected_bleu_cost, r.expected_simile_cost, r.val_weighted_loss
        );
    }
    out
}

/// Corpus-level scores of the argmax decode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeEval {
    pub corpus_bleu: f64,
    pub corpus_sim: f64,
    pub mean_simile: f64,
}

pub fn evaluate_decode(
    model: &ToyLexModel,
    data: &[SentencePair],
    scorer: &SimileScorer,
) -> Result<DecodeEval> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation corpus"));
    }
    let hyps: Vec<Vec<String>> = data
        .iter()
        .map(|(x, _)| decode(model, x))
        .collect::<Result<_>>()?;
    let refs: Vec<Vec<String>> = data.iter().map(|(_, u)| u.clone()).collect();
    let mut sim = 0.0;
    let mut simile = 0.0;
    for (r, h) in refs.iter().zip(&hyps) {
        sim += scorer.sim(r, h)?;
        simile += scorer.simile(r, h)?;
    }
    let n = data.len() as f64;
    Ok(DecodeEval {
        corpus_bleu: corpus_bleu(&refs, &hyps, scorer.config.max_ngram)?,
        corpus_sim: sim / n,
        mean_simile: simile / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTrainResult {
    /// Parameters with the lowest validation weighted loss.
    pub model: ToyLexModel,
    pub final_model: ToyLexModel,
    pub best_epoch: usize,
    pub log: Vec<RiskEpochLog>,
    /// Decode scores after the first fine-tuning epoch.
    pub checkpoint_epoch1: Option<DecodeEval>,
    /// Decode scores of the selected model.
    pub best_eval: DecodeEval,
}

/// Builds scored n-best lists for every pair. Returns, per pair, the
/// candidate ids with BLEU and SimiLe costs.
struct ScoredList {
    example: RiskExample,
    bleu_costs: Vec<f64>,
    simile_costs: Vec<f64>,
}

fn scored_lists(
    model: &ToyLexModel,
    data: &[SentencePair],
    k: usize,
    scorer: &SimileScorer,
    kind: CostKind,
) -> Result<Vec<ScoredList>> {
    data.par_iter()
        .map(|(x, r)| {
            let mut list = nbest(model, x, r, k)?;
            if list.candidates.is_empty() {
                return Err(Error::invalid(format!(
                    "no candidate besides the reference for source {:?}",
                    x.join(" ")
                )));
            }
            let mut bleu_costs = Vec::with_capacity(list.candidates.len());
            let mut simile_costs = Vec::with_capacity(list.candidates.len());
            for c in &mut list.candidates {
                let b = scorer.cost(CostKind::BleuCost, r, &c.tokens)?;
                let s = scorer.cost(CostKind::SimileCost, r, &c.tokens)?;
                c.cost = Some(match kind {
                    CostKind::BleuCost => b,
                    CostKind::SimileCost => s,
                    CostKind::HalfCost => 0.5 * (b + s),
                });
                bleu_costs.push(b);
                simile_costs.push(s);
            }
            Ok(ScoredList {
                example: RiskExample::new(model, &list)?,
                bleu_costs,
                simile_costs,
            })
        })
        .collect()
}

fn validation_row(
    model: &ToyLexModel,
    valid: &[SentencePair],
    config: &RiskTrainConfig,
    scorer: &SimileScorer,
    epoch: usize,
    lr: f64,
) -> Result<RiskEpochLog> {
    let lists = scored_lists(model, valid, config.k, scorer, config.cost_kind)?;
    let mut bleu = 0.0;
    let mut simile = 0.0;
    let mut weighted = 0.0;
    for l in &lists {
        let p = renormalize(&l.example.logprobs(model));
        bleu += p.iter().zip(&l.bleu_costs).map(|(p, c)| p * c).sum::<f64>();
        simile += p.iter().zip(&l.simile_costs).map(|(p, c)| p * c).sum::<f64>();
        let risk: f64 = p.iter().zip(&l.example.costs).map(|(p, c)| p * c).sum();
        weighted +=
            config.gamma * l.example.token_ls(model, config.epsilon) + (1.0 - config.gamma) * risk;
    }
    let n = lists.len() as f64;
    let row = RiskEpochLog {
        epoch,
        lr,
        expected_bleu_cost: bleu / n,
        expected_simile_cost: simile / n,
        val_weighted_loss: weighted / n,
    };
    if !(row.expected_bleu_cost.is_finite()
        && row.expected_simile_cost.is_finite()
        && row.val_weighted_loss.is_finite())
    {
        return Err(Error::NonFinite(format!("validation loss at epoch {epoch}")));
    }
    Ok(row)
}

/// Minimum-risk fine-tuning of a pre-trained model.
///
/// Each epoch decodes fresh n-best lists for the training sources, scores them
/// with the configured cost and takes one Nesterov step per mini-batch on the
/// weighted objective. Validation expected costs are logged before training
/// and after every epoch.
pub fn train_risk(
    model: &ToyLexModel,
    train: &[SentencePair],
    valid: &[SentencePair],
    config: &RiskTrainConfig,
    scorer: &SimileScorer,
) -> Result<RiskTrainResult> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    if valid.is_empty() {
        return Err(Error::Empty("validation corpus"));
    }
    to_ids(model, train)?;
    to_ids(model, valid)?;

    let mut model = model.clone();
    let mut opt = Nesterov::new(model.theta().len(), config.momentum, config.clip_norm);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let first = validation_row(&model, valid, config, scorer, 0, config.learning_rate)?;
    let mut best = (first.val_weighted_loss, 0, model.clone());
    let mut log = vec![first];
    let mut checkpoint_epoch1 = None;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for (e, &lr) in config.schedule().iter().enumerate() {
        let epoch = e + 1;
        let examples: Vec<RiskExample> =
            scored_lists(&model, train, config.k, scorer, config.cost_kind)?
                .into_iter()
                .map(|s| s.example)
                .collect();
        order.shuffle(&mut rng);
        for batch_idx in order.chunks(config.batch_size) {
            let batch: Vec<RiskExample> = batch_idx.iter().map(|&i| examples[i].clone()).collect();
            let (_, grad) = weighted_loss_grad(&model, &batch, config.gamma, config.epsilon)?;
            opt.step(model.theta_mut(), &grad, lr)?;
        }
        let row = validation_row(&model, valid, config, scorer, epoch, lr)?;
        if row.val_weighted_loss < best.0 {
            best = (row.val_weighted_loss, epoch, model.clone());
        }
        log.push(row);
        if epoch == 1 {
            checkpoint_epoch1 = Some(evaluate_decode(&model, valid, scorer)?);
        }
    }

    let best_eval = evaluate_decode(&best.2, valid, scorer)?;
    Ok(RiskTrainResult {
        model: best.2,
        final_model: model,
        best_epoch: best.1,
        log,
        checkpoint_epoch1,
        best_eval,
    })
}

/// Runs [`train_risk`] for each gamma and keeps the run whose selected model
/// has the lowest validation expected cost under the configured cost kind.
pub fn tune_gamma(
    model: &ToyLexModel,
    train: &[SentencePair],
    valid: &[SentencePair],
    config: &RiskTrainConfig,
    scorer: &SimileScorer,
    grid: &[f64],
) -> Result<(f64, RiskTrainResult)> {
    let mut best: Option<(f64, f64, RiskTrainResult)> = None;
    for &gamma in grid {
        let cfg = RiskTrainConfig {
            gamma,
            ..config.clone()
        };
        let run = train_risk(model, train, valid, &cfg, scorer)?;
        let row = &run.log[run.best_epoch];
        let score = match config.cost_kind {
            CostKind::BleuCost => row.expected_bleu_cost,
            CostKind::SimileCost => row.expected_simile_cost,
            CostKind::HalfCost => 0.5 * (row.expected_bleu_cost + row.expected_simile_cost),
        };
        if best.as_ref().is_none_or(|b| score < b.1) {
            best = Some((gamma, score, run));
        }
    }
    best.map(|(g, _, r)| (g, r))
        .ok_or(Error::Empty("gamma grid"))
}

/// One row of the n-best size sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub best_epoch: usize,
    pub final_expected_bleu_cost: f64,
    pub final_expected_simile_cost: f64,
    pub final_val_weighted_loss: f64,
    pub corpus_bleu: f64,
    pub corpus_sim: f64,
}

impl SweepRow {
    pub fn from_run(k: usize, run: &RiskTrainResult) -> Self {
        let last = run.log.last().expect("log has the epoch-0 row");
        Self {
            k,
            best_epoch: run.best_epoch,
            final_expected_bleu_cost: last.expected_bleu_cost,
            final_expected_simile_cost: last.expected_simile_cost,
            final_val_weighted_loss: last.val_weighted_loss,
            corpus_bleu: run.best_eval.corpus_bleu,
            corpus_sim: run.best_eval.corpus_sim,
        }
    }
}

pub const SWEEP_HEADER: &str = "k,best_epoch,final_expected_bleu_cost,final_expected_simile_cost,final_val_weighted_loss,corpus_bleu,corpus_sim";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k,
            r.best_epoch,
            r.final_expected_bleu_cost,
            r.final_expected_simile_cost,
            r.final_val_weighted_loss,
            r.corpus_bleu,
            r.corpus_sim
        );
    }
    out
}

/// Fine-tunes the same starting model once per n-best size with identical
/// seeds and settings otherwise.
pub fn sweep_nbest(
    model: &ToyLexModel,
    train: &[SentencePair],
    valid: &[SentencePair],
    config: &RiskTrainConfig,
    scorer: &SimileScorer,
    ks: &[usize],
) -> Result<Vec<SweepRow>> {
    if ks.is_empty() {
        return Err(Error::Empty("n-best sizes"));
    }
    ks.iter()
        .map(|&k| {
            let cfg = RiskTrainConfig {
                k,
                ..config.clone()
            };
            let run = train_risk(model, train, valid, &cfg, scorer)?;
            Ok(SweepRow::from_run(k, &run))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_anneals_until_floor() {
        let s = lr_schedule(0.25, 2, true, 10.0, 1e-4);
        assert_eq!(s.len(), 5);
        assert_eq!(&s[..2], &[0.25, 0.25]);
        assert!((s[4] - 0.00025).abs() < 1e-15);
        assert_eq!(lr_schedule(0.25, 3, false, 10.0, 1e-4), vec![0.25; 3]);
        assert_eq!(lr_schedule(0.0, 3, true, 10.0, 1e-4), vec![0.0; 3]);
    }

    #[test]
    fn config_validation() {
        assert!(RiskTrainConfig::default().validate().is_ok());
        let bad = RiskTrainConfig {
            gamma: 1.2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RiskTrainConfig {
            momentum: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = MleConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn csv_header() {
        let csv = risk_log_csv(&[RiskEpochLog {
            epoch: 0,
            lr: 0.25,
            expected_bleu_cost: 0.5,
            expected_simile_cost: 0.25,
            val_weighted_loss: 1.5,
        }]);
        assert_eq!(
            csv,
            "epoch,lr,expected_bleu_cost,expected_simile_cost,val_weighted_loss\n0,0.25,0.5,0.25,1.5\n"
        );
    }
}
