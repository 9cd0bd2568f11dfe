//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed even when all
//! checks pass. Exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simile_core::analysis::{
    average_ranks, nbest_pair_stats, paired_bootstrap, score_lists, spearman, BootstrapMetric,
    JudgmentSet,
};
use simile_core::data::{
    attach_nbest, load_embeddings, load_judgments, load_nbest, load_pairs, load_parallel,
    load_sentences, read_text, save_embeddings, save_judgments, save_nbest, save_pairs,
    save_parallel, write_text, Judgment, ParallelCorpus,
};
use simile_core::metrics::{
    brevity_penalty, length_penalty, sentence_bleu_smoothed, CostKind, SimileScorer,
};
use simile_core::riskopt::{
    nbest, risk_loss, seq_logprob_ids, sweep_nbest, train_risk, weighted_loss_grad, Candidate,
    KBest, NBestList, RiskExample, RiskTrainConfig, SentencePair, SweepRow, ToyLexModel,
};
use simile_core::simembed::{
    cosine, margin_loss_grad, train_sim, EmbeddingTable, ParaphrasePair, SimTrainConfig,
};
use simile_core::subword::{learn_bpe, BpeModel};
use simile_core::synth::{default_task, paraphrase_pairs, pretrained_model};

const GRAD_REL_TOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-6;
const MARGIN_INSTANCES: usize = 100;
const RISK_INSTANCES: usize = 50;
const GRAD_TIME_LIMIT: Duration = Duration::from_secs(30);
const NBEST_MODELS: usize = 200;
const NBEST_MAX_SEQUENCES: usize = 256;
const NBEST_TIME_LIMIT: Duration = Duration::from_secs(10);
const NBEST_SCORE_TOL: f64 = 1e-12;
const LP_TOL: f64 = 1e-12;
const BLEU_TOL: f64 = 1e-9;
const RISK_FIXTURE: f64 = 0.36128;
const RISK_FIXTURE_TOL: f64 = 1e-4;
const SIMILE_PAIRS: usize = 1000;
const FIXTURE_LISTS: usize = 50;
const PAIRS_PER_LIST: usize = 28;
const RISK_TIME_LIMIT: Duration = Duration::from_secs(120);
const SWEEP_KS: [usize; 3] = [2, 4, 8];
const SPEARMAN_TOL: f64 = 1e-12;
const BOOTSTRAP_SAMPLES: usize = 1000;
const EMBED_PAIRS: usize = 40;
const EMBED_EPOCHS: usize = 20;
const EMBED_GAP: f64 = 0.2;
const EMBED_TIME_LIMIT: Duration = Duration::from_secs(30);
const BPE_SENTENCES: usize = 1000;

type Check = std::result::Result<String, String>;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(f64::MIN_POSITIVE)
}

fn central_difference(params: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let x = p[i];
            p[i] = x + FD_STEP;
            let up = f(&p);
            p[i] = x - FD_STEP;
            let down = f(&p);
            p[i] = x;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

// Independent forward pass of the margin loss over a dense table.
fn margin_forward(table: &[f64], dim: usize, s: &[usize], sp: &[usize], t: &[usize], delta: f64) -> f64 {
    let mean = |ids: &[usize]| -> Vec<f64> {
        let mut v = vec![0.0; dim];
        for &i in ids {
            for d in 0..dim {
                v[d] += table[i * dim + d];
            }
        }
        v.iter().map(|x| x / ids.len() as f64).collect()
    };
    let cos = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (norm(a) * norm(b))
    };
    let (gs, gsp, gt) = (mean(s), mean(sp), mean(t));
    (delta - cos(&gs, &gsp) + cos(&gs, &gt)).max(0.0)
}

fn gradient_oracles() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let vocab: Vec<String> = (0..8).map(|i| format!("w{i}")).collect();
    let delta = 0.4;
    let mut worst_margin: f64 = 0.0;
    let mut done = 0;
    while done < MARGIN_INSTANCES {
        let dim = rng.gen_range(2..=6);
        let rows: Vec<(String, Vec<f64>)> = vocab
            .iter()
            .map(|w| (w.clone(), (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let table = EmbeddingTable::from_rows(rows).map_err(|e| e.to_string())?;
        let pick = |rng: &mut ChaCha8Rng| -> Vec<usize> {
            (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(0..vocab.len())).collect()
        };
        let (s, sp, t) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        if t == s || t == sp {
            continue;
        }
        let dense: Vec<f64> = (0..table.len()).flat_map(|i| table.row(i).to_vec()).collect();
        let hinge = margin_forward(&dense, dim, &s, &sp, &t, delta);
        // Stay clear of the hinge kink so central differences are smooth.
        if hinge < 1e-3 {
            continue;
        }
        let toks = |ids: &[usize]| -> Vec<String> { ids.iter().map(|&i| vocab[i].clone()).collect() };
        let pair = ParaphrasePair::new(toks(&s), toks(&sp)).map_err(|e| e.to_string())?;
        let sparse = margin_loss_grad(&table, &pair, &toks(&t), delta).map_err(|e| e.to_string())?;
        let mut analytic = vec![0.0; dense.len()];
        for (row, g) in sparse {
            analytic[row * dim..(row + 1) * dim].copy_from_slice(&g);
        }
        let fd = central_difference(&dense, |p| margin_forward(p, dim, &s, &sp, &t, delta));
        worst_margin = worst_margin.max(rel_error(&analytic, &fd));
        done += 1;
    }
    ensure(worst_margin < GRAD_REL_TOL, || format!("margin relative error {worst_margin:.2e}"))?;

    let mut worst_risk: f64 = 0.0;
    for _ in 0..RISK_INSTANCES {
        let (ns, nt) = (rng.gen_range(1..=3), rng.gen_range(2..=4));
        let mut model = ToyLexModel::new(
            (0..ns).map(|i| format!("s{i}")).collect(),
            (0..nt).map(|i| format!("t{i}")).collect(),
        )
        .map_err(|e| e.to_string())?;
        for v in model.theta_mut() {
            *v = rng.gen_range(-2.0..2.0);
        }
        let len = rng.gen_range(1..=4);
        let source_ids: Vec<usize> = (0..len).map(|_| rng.gen_range(0..ns)).collect();
        let reference_ids: Vec<usize> = (0..len).map(|_| rng.gen_range(0..nt)).collect();
        let n_cand = rng.gen_range(1..=5);
        let candidate_ids: Vec<Vec<usize>> = (0..n_cand)
            .map(|_| (0..len).map(|_| rng.gen_range(0..nt)).collect())
            .collect();
        let costs: Vec<f64> = (0..n_cand).map(|_| rng.gen_range(0.0..1.0)).collect();
        let gamma = rng.gen_range(0.0..1.0);
        let eps = 0.1;
        let ex = RiskExample {
            source_ids: source_ids.clone(),
            reference_ids: reference_ids.clone(),
            candidate_ids: candidate_ids.clone(),
            costs: costs.clone(),
        };
        let (_, analytic) =
            weighted_loss_grad(&model, &[ex], gamma, eps).map_err(|e| e.to_string())?;
        let forward = |theta: &[f64]| -> f64 {
            let log_softmax = |row: &[f64]| -> Vec<f64> {
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z = row.iter().map(|x| (x - m).exp()).sum::<f64>().ln() + m;
                row.iter().map(|x| x - z).collect()
            };
            let lp = |s: usize| log_softmax(&theta[s * nt..(s + 1) * nt]);
            let mut tok = 0.0;
            for (&s, &t) in source_ids.iter().zip(&reference_ids) {
                for (k, l) in lp(s).iter().enumerate() {
                    let q = if k == t { 1.0 - eps + eps / nt as f64 } else { eps / nt as f64 };
                    tok -= q * l;
                }
            }
            let seq: Vec<f64> = candidate_ids
                .iter()
                .map(|u| source_ids.iter().zip(u).map(|(&s, &t)| lp(s)[t]).sum())
                .collect();
            let z: f64 = seq.iter().map(|l| l.exp()).sum();
            let risk: f64 = seq.iter().zip(&costs).map(|(l, c)| l.exp() / z * c).sum();
            gamma * tok + (1.0 - gamma) * risk
        };
        let fd = central_difference(model.theta(), forward);
        worst_risk = worst_risk.max(rel_error(&analytic, &fd));
    }
    ensure(worst_risk < GRAD_REL_TOL, || format!("risk relative error {worst_risk:.2e}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < GRAD_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{MARGIN_INSTANCES} margin (max rel err {worst_margin:.1e}), {RISK_INSTANCES} risk (max rel err {worst_risk:.1e}), {elapsed:.2?}"
    ))
}

fn exact_nbest() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut models = 0;
    let mut sequences = 0;
    while models < NBEST_MODELS {
        let nt: usize = rng.gen_range(2..=5);
        let len = rng.gen_range(1..=4);
        let total = nt.pow(len as u32);
        if total > NBEST_MAX_SEQUENCES {
            continue;
        }
        let ns = rng.gen_range(1..=3);
        let mut model = ToyLexModel::new(
            (0..ns).map(|i| format!("s{i}")).collect(),
            (0..nt).map(|i| format!("t{i}")).collect(),
        )
        .map_err(|e| e.to_string())?;
        // Coarse values on half the models so exact ties occur.
        let coarse = models % 2 == 0;
        for v in model.theta_mut() {
            *v = if coarse { f64::from(rng.gen_range(0..3)) } else { rng.gen_range(-3.0..3.0) };
        }
        let xs: Vec<usize> = (0..len).map(|_| rng.gen_range(0..ns)).collect();

        let mut all: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..len {
            all = all
                .into_iter()
                .flat_map(|p| (0..nt).map(move |t| [p.clone(), vec![t]].concat()))
                .collect();
        }
        let mut brute: Vec<(Vec<usize>, f64)> = all
            .into_iter()
            .map(|u| {
                let s = seq_logprob_ids(&model, &xs, &u);
                (u, s)
            })
            .collect();
        brute.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        let lazy: Vec<(Vec<usize>, f64)> = KBest::new(&model, &xs).collect();
        ensure(lazy.len() == total, || format!("model {models}: {} of {total} sequences", lazy.len()))?;
        for (i, (a, b)) in lazy.iter().zip(&brute).enumerate() {
            ensure(a.0 == b.0 && (a.1 - b.1).abs() <= NBEST_SCORE_TOL, || {
                format!("model {models} rank {i}: {:?} vs {:?}", a, b)
            })?;
        }

        // Reference filtering: nbest() equals the brute-force list minus the reference.
        let source: Vec<String> = xs.iter().map(|&s| format!("s{s}")).collect();
        let reference = &brute[rng.gen_range(0..total)].0;
        let ref_tokens: Vec<String> = reference.iter().map(|&t| format!("t{t}")).collect();
        let k = rng.gen_range(1..=total);
        let list = nbest(&model, &source, &ref_tokens, k).map_err(|e| e.to_string())?;
        let want: Vec<Vec<String>> = brute
            .iter()
            .filter(|(u, _)| u != reference)
            .take(k)
            .map(|(u, _)| u.iter().map(|&t| format!("t{t}")).collect())
            .collect();
        let got: Vec<Vec<String>> = list.candidates.iter().map(|c| c.tokens.clone()).collect();
        ensure(got == want, || format!("model {models}: filtered list differs"))?;
        ensure(list.exhausted == (want.len() < k), || format!("model {models}: exhausted flag"))?;
        models += 1;
        sequences += total;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < NBEST_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("{models} models, {sequences} sequences enumerated, {elapsed:.2?}"))
}

fn formula_fixtures() -> Check {
    let lp = length_penalty(8, 4).map_err(|e| e.to_string())?;
    ensure((lp - (-1f64).exp()).abs() <= LP_TOL, || format!("LP(8,4) = {lp}"))?;
    let lp_sym = length_penalty(4, 8).map_err(|e| e.to_string())?;
    ensure(lp_sym == lp, || format!("LP(4,8) = {lp_sym}"))?;

    let long = brevity_penalty(4, 8).map_err(|e| e.to_string())?;
    let equal = brevity_penalty(5, 5).map_err(|e| e.to_string())?;
    let short = brevity_penalty(8, 4).map_err(|e| e.to_string())?;
    ensure(long == 1.0 && equal == 1.0, || format!("BP not clamped: {long}, {equal}"))?;
    ensure((short - (-1f64).exp()).abs() <= LP_TOL, || format!("BP(8,4) = {short}"))?;

    let bleu = sentence_bleu_smoothed(&["the", "cat", "sat"], &["the", "cat"], 4).map_err(|e| e.to_string())?;
    ensure((bleu - (-0.5f64).exp()).abs() <= BLEU_TOL, || format!("smoothed BLEU = {bleu}"))?;

    let list = NBestList {
        source: vec![],
        reference: vec![],
        candidates: vec![
            Candidate { tokens: vec!["a".into()], logprob: -1.0, cost: Some(0.2) },
            Candidate { tokens: vec!["b".into()], logprob: -2.0, cost: Some(0.8) },
        ],
        exhausted: false,
    };
    let risk = risk_loss(&list).map_err(|e| e.to_string())?;
    let (w1, w2) = ((-1f64).exp(), (-2f64).exp());
    let oracle = (w1 * 0.2 + w2 * 0.8) / (w1 + w2);
    ensure((risk - oracle).abs() <= 1e-15, || format!("risk {risk} vs oracle {oracle}"))?;
    ensure((risk - RISK_FIXTURE).abs() <= RISK_FIXTURE_TOL, || format!("risk = {risk}"))?;
    Ok(format!("LP {lp:.12}, BLEU {bleu:.9}, risk {risk:.5}"))
}

fn simile_reduction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let vocab: Vec<String> = (0..30).map(|i| format!("v{i}")).collect();
    let rows = vocab
        .iter()
        .map(|w| (w.clone(), (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    let scorer = SimileScorer::new(EmbeddingTable::from_rows(rows).map_err(|e| e.to_string())?);
    for i in 0..SIMILE_PAIRS {
        let n = rng.gen_range(1..=12);
        let r: Vec<&String> = (0..n).map(|_| vocab.choose(&mut rng).expect("vocab")).collect();
        let h: Vec<&String> = (0..n).map(|_| vocab.choose(&mut rng).expect("vocab")).collect();
        let sim = scorer.sim(&r, &h).map_err(|e| e.to_string())?;
        let simile = scorer.simile(&r, &h).map_err(|e| e.to_string())?;
        ensure(sim.to_bits() == simile.to_bits(), || format!("pair {i}: sim {sim} simile {simile}"))?;
    }
    Ok(format!("{SIMILE_PAIRS} equal-length pairs, simile == sim bit for bit"))
}

fn fixture_lists() -> Result<(Vec<NBestList>, SimileScorer), String> {
    let dir = fixtures();
    let cands = load_nbest(&dir.join("valid.nbest")).map_err(|e| e.to_string())?;
    let sources = load_sentences(&dir.join("valid.src")).map_err(|e| e.to_string())?;
    let refs = load_sentences(&dir.join("valid.ref")).map_err(|e| e.to_string())?;
    let lists = attach_nbest(cands, &sources, &refs, 8).map_err(|e| e.to_string())?;
    let scorer = SimileScorer::new(load_embeddings(&dir.join("sim.emb")).map_err(|e| e.to_string())?);
    Ok((lists, scorer))
}

fn score_diversity() -> Check {
    let (lists, scorer) = fixture_lists()?;
    ensure(lists.len() == FIXTURE_LISTS, || format!("{} lists", lists.len()))?;
    ensure(lists.iter().all(|l| l.candidates.len() == 8), || "a list is not 8 long".into())?;
    let bleu = nbest_pair_stats(&score_lists(&lists, |r, h| scorer.bleu(r, h)).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let simile = nbest_pair_stats(&score_lists(&lists, |r, h| scorer.simile(r, h)).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let want_pairs = FIXTURE_LISTS * PAIRS_PER_LIST;
    ensure(bleu.total_pairs == want_pairs && simile.total_pairs == want_pairs, || {
        format!("pairs {} / {}", bleu.total_pairs, simile.total_pairs)
    })?;
    ensure(simile.distinct_fraction > bleu.distinct_fraction, || {
        format!("SimiLe {:.3} <= BLEU {:.3}", simile.distinct_fraction, bleu.distinct_fraction)
    })?;
    Ok(format!(
        "{want_pairs} pairs; distinct SimiLe {:.1}% > BLEU {:.1}%",
        100.0 * simile.distinct_fraction,
        100.0 * bleu.distinct_fraction
    ))
}

struct Task {
    model: ToyLexModel,
    train: Vec<SentencePair>,
    valid: Vec<SentencePair>,
    scorer: SimileScorer,
}

fn load_task() -> Result<Task, String> {
    let dir = fixtures();
    let pairs = |split: &str| -> Result<Vec<SentencePair>, String> {
        let c = load_parallel(&dir.join(format!("{split}.src")), &dir.join(format!("{split}.ref")))
            .map_err(|e| e.to_string())?;
        Ok(c.pairs())
    };
    let model: ToyLexModel = serde_json::from_str(&read_text(&dir.join("pretrained.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let scorer = SimileScorer::new(load_embeddings(&dir.join("sim.emb")).map_err(|e| e.to_string())?);
    Ok(Task {
        model,
        train: pairs("train")?,
        valid: pairs("valid")?,
        scorer,
    })
}

fn risk_training() -> Check {
    let start = Instant::now();
    let task = load_task()?;
    let cfg = RiskTrainConfig {
        cost_kind: CostKind::SimileCost,
        ..RiskTrainConfig::default()
    };
    let run = train_risk(&task.model, &task.train, &task.valid, &cfg, &task.scorer).map_err(|e| e.to_string())?;
    let (e0, e1, e10) = (&run.log[0], &run.log[1], &run.log[10]);
    ensure(e1.expected_simile_cost < e0.expected_simile_cost, || {
        format!("epoch 1 SimiLe cost {} >= epoch 0 {}", e1.expected_simile_cost, e0.expected_simile_cost)
    })?;
    ensure(e10.expected_simile_cost < e0.expected_simile_cost, || {
        format!("epoch 10 SimiLe cost {} >= epoch 0 {}", e10.expected_simile_cost, e0.expected_simile_cost)
    })?;
    ensure(e10.expected_bleu_cost < e0.expected_bleu_cost, || {
        format!("epoch 10 BLEU cost {} >= epoch 0 {}", e10.expected_bleu_cost, e0.expected_bleu_cost)
    })?;
    let bleu_cfg = RiskTrainConfig {
        cost_kind: CostKind::BleuCost,
        ..RiskTrainConfig::default()
    };
    let bleu_run =
        train_risk(&task.model, &task.train, &task.valid, &bleu_cfg, &task.scorer).map_err(|e| e.to_string())?;
    let (b0, b10) = (&bleu_run.log[0], &bleu_run.log[10]);
    ensure(b10.expected_bleu_cost < b0.expected_bleu_cost && b10.expected_simile_cost < b0.expected_simile_cost, || {
        format!("BLEU-cost run: epoch 0 {b0:?}, epoch 10 {b10:?}")
    })?;
    let elapsed = start.elapsed();
    ensure(elapsed < RISK_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "SimiLe-cost run: SimiLe {:.4} -> {:.4} (epoch 1) -> {:.4}, BLEU {:.4} -> {:.4}; \
         BLEU-cost run: SimiLe {:.4} -> {:.4}, BLEU {:.4} -> {:.4}; {elapsed:.2?}",
        e0.expected_simile_cost,
        e1.expected_simile_cost,
        e10.expected_simile_cost,
        e0.expected_bleu_cost,
        e10.expected_bleu_cost,
        b0.expected_simile_cost,
        b10.expected_simile_cost,
        b0.expected_bleu_cost,
        b10.expected_bleu_cost
    ))
}

fn nbest_sweep() -> Check {
    let task = load_task()?;
    let cfg = RiskTrainConfig {
        seed: 7,
        ..RiskTrainConfig::default()
    };
    let swept = sweep_nbest(&task.model, &task.train, &task.valid, &cfg, &task.scorer, &SWEEP_KS)
        .map_err(|e| e.to_string())?;
    for (row, &k) in swept.iter().zip(&SWEEP_KS) {
        let single = RiskTrainConfig { k, ..cfg.clone() };
        let run = train_risk(&task.model, &task.train, &task.valid, &single, &task.scorer)
            .map_err(|e| e.to_string())?;
        let want = SweepRow::from_run(k, &run);
        ensure(*row == want, || format!("k = {k}: {row:?} vs {want:?}"))?;
    }
    let summary: Vec<String> = swept
        .iter()
        .map(|r| format!("k={} SimiLe cost {:.4}", r.k, r.final_expected_simile_cost))
        .collect();
    Ok(format!("identical to single runs; {}", summary.join(", ")))
}

fn correlation() -> Check {
    let x = [
        3.1, 1.2, 3.1, 4.0, 0.5, 2.2, 2.2, 2.2, 5.5, 1.2, 6.0, 0.1, 4.0, 3.3, 7.7, 2.9, 0.9, 5.5, 6.6, 8.0,
    ];
    let y = [
        2.0, 1.0, 3.0, 4.0, 1.0, 2.0, 3.0, 2.0, 5.0, 1.0, 4.0, 1.0, 5.0, 3.0, 5.0, 2.0, 1.0, 4.0, 5.0, 5.0,
    ];
    // Ranked by hand, ties sharing the mean of their positions.
    let rx = [
        10.5, 4.5, 10.5, 13.5, 2.0, 7.0, 7.0, 7.0, 15.5, 4.5, 17.0, 1.0, 13.5, 12.0, 19.0, 9.0, 3.0, 15.5, 18.0, 20.0,
    ];
    let ry = [
        7.5, 3.0, 11.0, 14.0, 3.0, 7.5, 11.0, 7.5, 18.0, 3.0, 14.0, 3.0, 18.0, 11.0, 18.0, 7.5, 3.0, 14.0, 18.0, 18.0,
    ];
    // Brute-force average ranks: count smaller and equal values.
    let brute = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&a| {
                let less = v.iter().filter(|&&b| b < a).count() as f64;
                let eq = v.iter().filter(|&&b| b == a).count() as f64;
                less + (eq + 1.0) / 2.0
            })
            .collect()
    };
    ensure(brute(&x) == rx && brute(&y) == ry, || "hand ranks disagree with brute force".into())?;
    ensure(average_ranks(&x) == rx && average_ranks(&y) == ry, || "average_ranks differs".into())?;
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    let oracle = cov / (vx * vy).sqrt();
    let set = JudgmentSet::from_columns(&x, &y).map_err(|e| e.to_string())?;
    let rho = spearman(&set).map_err(|e| e.to_string())?;
    ensure((rho - oracle).abs() <= SPEARMAN_TOL, || format!("spearman {rho} vs oracle {oracle}"))?;

    let same = spearman(&JudgmentSet::from_columns(&x, &x).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    let rev = spearman(&JudgmentSet::from_columns(&x, &neg).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(same == 1.0 && rev == -1.0, || format!("identical {same}, reversed {rev}"))?;
    Ok(format!("20-point fixture rho {rho:.12} (oracle {oracle:.12}); +1 / -1 exact"))
}

fn bootstrap_calibration() -> Check {
    let task = load_task()?;
    let refs: Vec<Vec<String>> = task.valid.iter().map(|(_, r)| r.clone()).collect();
    let same = BootstrapMetric::bleu(&refs, &refs, &refs, 4).map_err(|e| e.to_string())?;
    let r = paired_bootstrap(&same, BOOTSTRAP_SAMPLES, 3).map_err(|e| e.to_string())?;
    ensure(r.p_value == 1.0 && r.ties == 1.0, || format!("identical systems: {r:?}"))?;

    // B replaces the first word of every sentence, so A wins on every resample.
    let worse: Vec<Vec<String>> = refs
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s[0] = "<bad>".into();
            s
        })
        .collect();
    let dom = BootstrapMetric::bleu(&refs, &refs, &worse, 4).map_err(|e| e.to_string())?;
    let r = paired_bootstrap(&dom, BOOTSTRAP_SAMPLES, 3).map_err(|e| e.to_string())?;
    ensure(r.p_value == 0.0 && r.win_a == 1.0, || format!("dominant system: {r:?}"))?;

    let scores_a: Vec<f64> = (0..refs.len()).map(|i| ((i * 37) % 17) as f64 / 17.0).collect();
    let scores_b: Vec<f64> = (0..refs.len()).map(|i| ((i * 11) % 13) as f64 / 13.0).collect();
    let m = BootstrapMetric::mean(scores_a, scores_b).map_err(|e| e.to_string())?;
    let first = serde_json::to_string(&paired_bootstrap(&m, BOOTSTRAP_SAMPLES, 99).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let single = pool.install(|| paired_bootstrap(&m, BOOTSTRAP_SAMPLES, 99)).map_err(|e| e.to_string())?;
    let second = serde_json::to_string(&single).map_err(|e| e.to_string())?;
    ensure(first == second, || "fixed seed is not reproducible".into())?;
    Ok("identical p=1, dominant p=0, same seed byte-identical across thread counts".into())
}

fn embedding_training() -> Check {
    let start = Instant::now();
    let (pairs, vocab) = paraphrase_pairs(EMBED_PAIRS, 17);
    let table = EmbeddingTable::random(&vocab, 50, 17).map_err(|e| e.to_string())?;
    let cfg = SimTrainConfig {
        epochs: EMBED_EPOCHS,
        minibatch_size: 8,
        megabatch_factor: 2,
        seed: 17,
        ..SimTrainConfig::default()
    };
    let (trained, _) = train_sim(&table, &pairs, &cfg).map_err(|e| e.to_string())?;
    let enc = |t: &[String]| simile_core::simembed::encode(&trained, t);
    let (mut pos, mut neg, mut n_neg) = (0.0, 0.0, 0usize);
    for (i, p) in pairs.iter().enumerate() {
        let a = enc(&p.s).map_err(|e| e.to_string())?;
        pos += cosine(&a, &enc(&p.s_prime).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for (j, q) in pairs.iter().enumerate() {
            if i != j {
                neg += cosine(&a, &enc(&q.s_prime).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
                n_neg += 1;
            }
        }
    }
    let gap = pos / pairs.len() as f64 - neg / n_neg as f64;
    ensure(gap > EMBED_GAP, || format!("gap {gap:.4}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < EMBED_TIME_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("paraphrase minus mismatched sim = {gap:.4}, {elapsed:.2?}"))
}

fn round_trips() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let letters: Vec<char> = "abcdefghijklmnoprstuvyzäöüé".chars().collect();
    let lexicon: Vec<String> = (0..300)
        .map(|_| (0..rng.gen_range(1..=9)).map(|_| *letters.choose(&mut rng).expect("letters")).collect())
        .collect();
    let corpus: Vec<String> = (0..BPE_SENTENCES)
        .map(|_| {
            let n = rng.gen_range(1..=15);
            (0..n).map(|_| lexicon.choose(&mut rng).expect("lexicon").as_str()).collect::<Vec<_>>().join(" ")
        })
        .collect();
    let bpe = learn_bpe(&corpus, 400).map_err(|e| e.to_string())?;
    for (i, line) in corpus.iter().enumerate() {
        let back = bpe.detokenize(&bpe.segment(line));
        ensure(&back == line, || format!("sentence {i}: {line:?} -> {back:?}"))?;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name);
    let e = |x: simile_core::Error| x.to_string();

    bpe.save(&p("bpe.model")).map_err(e)?;
    ensure(BpeModel::load(&p("bpe.model")).map_err(e)? == bpe, || "BPE model".into())?;

    let table = EmbeddingTable::random(&lexicon[..50], 9, 3).map_err(e)?;
    save_embeddings(&p("sim.emb"), &table).map_err(e)?;
    let back = load_embeddings(&p("sim.emb")).map_err(e)?;
    let bit_exact = (0..table.len()).all(|i| {
        table.row(i).iter().zip(back.row(i)).all(|(a, b)| a.to_bits() == b.to_bits())
    });
    ensure(back == table && bit_exact, || "embeddings".into())?;

    let task = load_task()?;
    let (lists, _) = fixture_lists()?;
    save_nbest(&p("n.best"), &lists).map_err(e)?;
    let sources: Vec<Vec<String>> = lists.iter().map(|l| l.source.clone()).collect();
    let refs: Vec<Vec<String>> = lists.iter().map(|l| l.reference.clone()).collect();
    let back = attach_nbest(load_nbest(&p("n.best")).map_err(e)?, &sources, &refs, 8).map_err(e)?;
    ensure(back == lists, || "n-best".into())?;

    let pairs = paraphrase_pairs(30, 2).0;
    save_pairs(&p("pairs.tsv"), &pairs).map_err(e)?;
    ensure(load_pairs(&p("pairs.tsv")).map_err(e)? == pairs, || "paraphrase pairs".into())?;

    let judgments: Vec<Judgment> = task
        .valid
        .iter()
        .enumerate()
        .map(|(i, (s, r))| Judgment {
            reference: r.clone(),
            hypothesis: s.clone(),
            human: (i as f64).sqrt() - 3.0,
        })
        .collect();
    save_judgments(&p("j.tsv"), &judgments).map_err(e)?;
    ensure(load_judgments(&p("j.tsv")).map_err(e)? == judgments, || "judgments".into())?;

    let corpus = ParallelCorpus::from_pairs("valid", &task.valid).map_err(e)?;
    save_parallel(&corpus, &p("valid.src"), &p("valid.ref")).map_err(e)?;
    ensure(load_parallel(&p("valid.src"), &p("valid.ref")).map_err(e)? == corpus, || "parallel".into())?;

    let trained = pretrained_model(&default_task()).map_err(e)?;
    write_text(&p("model.json"), &serde_json::to_string(&trained).map_err(|x| x.to_string())?).map_err(e)?;
    let model: ToyLexModel =
        serde_json::from_str(&read_text(&p("model.json")).map_err(e)?).map_err(|x| x.to_string())?;
    ensure(model == trained, || "model JSON".into())?;

    Ok(format!(
        "{BPE_SENTENCES} sentences segment/detokenize; BPE, embeddings, n-best, pairs, judgments, parallel, model"
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("gradient oracles", gradient_oracles),
        ("exact n-best", exact_nbest),
        ("formula fixtures", formula_fixtures),
        ("SimiLe reduction", simile_reduction),
        ("n-best score diversity", score_diversity),
        ("risk fine-tuning", risk_training),
        ("n-best size sweep", nbest_sweep),
        ("correlation machinery", correlation),
        ("bootstrap calibration", bootstrap_calibration),
        ("embedding training", embedding_training),
        ("round trips", round_trips),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
