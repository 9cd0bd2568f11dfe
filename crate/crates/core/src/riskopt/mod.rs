//! Minimum-risk fine-tuning.
//!
//! A [`ToyLexModel`] generates each output position independently from the
//! aligned source token, which keeps sequence probabilities exact and n-best
//! lists enumerable while still exercising the full objective: expected cost
//! over a renormalized candidate set, mixed with label-smoothed token loss and
//! optimized with clipped Nesterov momentum.

mod model;
mod nbest;
mod objective;
mod optim;
mod train;

pub use model::{seq_logprob, token_ls_loss, ToyLexModel};
pub use nbest::{decode, nbest, Candidate, KBest, NBestList};
pub use objective::{
    renormalize, risk_grad, risk_grad_theta, risk_loss, weighted_loss, weighted_loss_grad,
    RiskExample,
};
pub use optim::Nesterov;
pub use train::{
    evaluate_decode, lr_schedule, mle_train, risk_log_csv, sweep_csv, sweep_nbest, train_risk,
    tune_gamma, DecodeEval, MleConfig, MleEpochLog, MleResult, RiskEpochLog, RiskTrainConfig,
    RiskTrainResult, SentencePair, SweepRow, GAMMA_GRID, RISK_LOG_HEADER, SWEEP_HEADER,
};

/// Log-probability of `u` given `x` from precomputed ids; exposed for oracles.
pub fn seq_logprob_ids(model: &ToyLexModel, x: &[usize], u: &[usize]) -> f64 {
    model::seq_logprob_ids(model, x, u)
}
