//! Deterministic synthetic data: paraphrase pairs for encoder training and a
//! small word-for-word translation task with synonymous target words.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::metrics::{CostKind, SimileScorer};
use crate::riskopt::{mle_train, nbest, MleConfig, NBestList, SentencePair, ToyLexModel};
use crate::simembed::{EmbeddingTable, ParaphrasePair};

/// `(source word, [preferred target, synonym])` for each concept.
pub const LEXICON: [(&str, [&str; 2]); 16] = [
    ("gross", ["big", "large"]),
    ("klein", ["small", "little"]),
    ("schnell", ["fast", "quick"]),
    ("haus", ["house", "home"]),
    ("wagen", ["car", "auto"]),
    ("froh", ["happy", "glad"]),
    ("beginnen", ["begin", "start"]),
    ("ende", ["end", "finish"]),
    ("kaufen", ["buy", "purchase"]),
    ("helfen", ["help", "assist"]),
    ("strasse", ["road", "street"]),
    ("kind", ["child", "kid"]),
    ("reden", ["talk", "speak"]),
    ("klug", ["smart", "clever"]),
    ("wuetend", ["angry", "mad"]),
    ("stein", ["rock", "stone"]),
];

pub const TRAIN_SIZE: usize = 200;
pub const VALID_SIZE: usize = 50;
pub const TASK_SEED: u64 = 2019;
pub const EMBED_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationTask {
    pub train: Vec<SentencePair>,
    pub valid: Vec<SentencePair>,
}

impl TranslationTask {
    pub fn source_vocab() -> Vec<String> {
        LEXICON.iter().map(|(s, _)| (*s).to_owned()).collect()
    }

    pub fn target_vocab() -> Vec<String> {
        LEXICON
            .iter()
            .flat_map(|(_, t)| t.iter().map(|w| (*w).to_owned()))
            .collect()
    }

    /// An untrained model over the task vocabularies.
    pub fn blank_model(&self) -> ToyLexModel {
        ToyLexModel::new(Self::source_vocab(), Self::target_vocab()).expect("lexicon is non-empty")
    }
}

/// Sentences of 3 to 6 words. Each reference word is the preferred
/// translation with probability 0.6, the synonym with 0.3 and a random target
/// word otherwise.
pub fn translation_task(n_train: usize, n_valid: usize, seed: u64) -> TranslationTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets = TranslationTask::target_vocab();
    let sample = |rng: &mut ChaCha8Rng| -> SentencePair {
        let len = rng.gen_range(3..=6);
        let mut src = Vec::with_capacity(len);
        let mut reference = Vec::with_capacity(len);
        for _ in 0..len {
            let (s, t) = LEXICON[rng.gen_range(0..LEXICON.len())];
            src.push(s.to_owned());
            let u: f64 = rng.gen();
            let word = if u < 0.6 {
                t[0]
            } else if u < 0.9 {
                t[1]
            } else {
                targets.choose(rng).expect("non-empty").as_str()
            };
            reference.push(word.to_owned());
        }
        (src, reference)
    };
    let train = (0..n_train).map(|_| sample(&mut rng)).collect();
    let valid = (0..n_valid).map(|_| sample(&mut rng)).collect();
    TranslationTask { train, valid }
}

/// The bundled task: 200 training and 50 validation pairs.
pub fn default_task() -> TranslationTask {
    translation_task(TRAIN_SIZE, VALID_SIZE, TASK_SEED)
}

/// SIM embeddings for the target vocabulary: synonyms share a random concept
/// vector and differ by a smaller random offset.
pub fn concept_embeddings(dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for (_, syn) in LEXICON {
        let concept: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for w in syn {
            let v = concept.iter().map(|c| c + rng.gen_range(-0.35..0.35)).collect();
            rows.push((w.to_owned(), v));
        }
    }
    EmbeddingTable::from_rows(rows)
}

pub fn default_scorer() -> SimileScorer {
    SimileScorer::new(concept_embeddings(EMBED_DIM, TASK_SEED).expect("dimension is positive"))
}

/// Short label-smoothed MLE run that leaves the model partly trained, the
/// starting point for risk fine-tuning.
pub fn pretrain_config() -> MleConfig {
    MleConfig {
        epochs: 2,
        anneal: false,
        learning_rate: 0.1,
        seed: TASK_SEED,
        ..MleConfig::default()
    }
}

pub fn pretrained_model(task: &TranslationTask) -> Result<ToyLexModel> {
    Ok(mle_train(&task.blank_model(), &task.train, &task.valid, &pretrain_config())?.model)
}

/// n-best lists for the validation pairs, scored with `kind`.
pub fn nbest_fixture(
    model: &ToyLexModel,
    pairs: &[SentencePair],
    k: usize,
    scorer: &SimileScorer,
    kind: CostKind,
) -> Result<Vec<NBestList>> {
    pairs
        .iter()
        .map(|(x, r)| {
            let mut list = nbest(model, x, r, k)?;
            for c in &mut list.candidates {
                c.cost = Some(scorer.cost(kind, r, &c.tokens)?);
            }
            Ok(list)
        })
        .collect()
}

/// `n` paraphrase pairs over a vocabulary of `t00`..`t59`. Each `s` has 6 to 9
/// words; `s′` is a shuffled copy with one or two words replaced.
pub fn paraphrase_pairs(n: usize, seed: u64) -> (Vec<ParaphrasePair>, Vec<String>) {
    let vocab: Vec<String> = (0..60).map(|i| format!("t{i:02}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (0..n)
        .map(|_| {
            let len = rng.gen_range(6..=9);
            let s: Vec<String> = (0..len).map(|_| vocab.choose(&mut rng).expect("non-empty").clone()).collect();
            let mut sp = s.clone();
            for _ in 0..rng.gen_range(1..=2) {
                let i = rng.gen_range(0..sp.len());
                sp[i] = vocab.choose(&mut rng).expect("non-empty").clone();
            }
            sp.shuffle(&mut rng);
            ParaphrasePair::new(s, sp).expect("both sides non-empty")
        })
        .collect();
    (pairs, vocab)
}
