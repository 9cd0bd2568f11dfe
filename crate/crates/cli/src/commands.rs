use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::json;
use simile_core::analysis::{
    compare_table, cost_histogram, f1_delta_multi, lexical_f1, metric_compare_sort,
    nbest_pair_stats, paired_bootstrap, score_lists, BootstrapMetric, BucketScheme,
    CorrelationReport, JudgmentSet,
};
use simile_core::data::{
    load_embeddings, load_judgments, load_nbest, load_pairs, load_sentences, load_tags, read_text,
    save_embeddings, save_pairs, paranmt_filter, FilterConfig,
};
use simile_core::metrics::{corpus_bleu, symmetric, LengthUnit, MetricConfig, SimileScorer};
use simile_core::riskopt::{
    mle_train, risk_log_csv, sweep_csv, sweep_nbest, train_risk, tune_gamma, MleConfig,
    NBestList, RiskTrainConfig, SentencePair, SweepRow, ToyLexModel, GAMMA_GRID,
};
use simile_core::simembed::{train_sim, EmbeddingTable, ParaphrasePair, SimTrainConfig};
use simile_core::subword::{learn_bpe, BpeModel};
use simile_core::{words, Error, Result};

use crate::output::Run;
use crate::{
    BootstrapArgs, Cli, Command, CompareArgs, CorpusArgs, CorrelateArgs, F1Args, FilterPairsArgs,
    HistArgs, LearnBpeArgs, MetricArgs, MetricName, MleTrainArgs, NbestInput, OptimArgs, PairsArgs,
    RiskArgs, RiskTrainArgs, ScoreArgs, SegmentArgs, SweepArgs, TrainSimArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    let mut run = Run::new(&cli.out);
    let seed = cli.seed;
    match &cli.command {
        Command::LearnBpe(a) => learn_bpe_cmd(&mut run, a)?,
        Command::Segment(a) => segment(&mut run, a)?,
        Command::TrainSim(a) => train_sim_cmd(&mut run, a, seed)?,
        Command::Score(a) => score(&mut run, a)?,
        Command::FilterPairs(a) => filter_pairs(&mut run, a)?,
        Command::MleTrain(a) => mle(&mut run, a, seed)?,
        Command::RiskTrain(a) => risk(&mut run, a, seed)?,
        Command::SweepNbest(a) => sweep(&mut run, a, seed)?,
        Command::AnalyzeHist(a) => hist(&mut run, a)?,
        Command::AnalyzePairs(a) => pairs(&mut run, a)?,
        Command::AnalyzeF1(a) => f1(&mut run, a)?,
        Command::CompareMetrics(a) => compare(&mut run, a)?,
        Command::Correlate(a) => correlate(&mut run, a)?,
        Command::Bootstrap(a) => bootstrap(&mut run, a, seed)?,
    }
    run.finish(cli.command.name(), seed, &cli.command)
}

fn lines(run: &mut Run, path: &Path) -> Result<Vec<String>> {
    Ok(read_text(run.input(path))?.lines().map(str::to_owned).collect())
}

fn sentences(run: &mut Run, path: &Path) -> Result<Vec<Vec<String>>> {
    load_sentences(run.input(path))
}

fn aligned(run: &mut Run, refs: &Path, hyps: &Path) -> Result<(Vec<Vec<String>>, Vec<Vec<String>>)> {
    let r = sentences(run, refs)?;
    let h = sentences(run, hyps)?;
    if r.len() != h.len() {
        return Err(Error::LengthMismatch {
            what: "references vs hypotheses",
            left: r.len(),
            right: h.len(),
        });
    }
    Ok((r, h))
}

fn scorer(run: &mut Run, m: &MetricArgs) -> Result<SimileScorer> {
    let config = MetricConfig {
        alpha: m.alpha,
        ..MetricConfig::default()
    };
    config.validate()?;
    let mut s = SimileScorer::new(load_embeddings(run.input(&m.emb))?);
    s.config = config;
    if let Some(p) = &m.bpe {
        s = s.with_bpe(BpeModel::load(run.input(p))?);
    }
    if m.subword_lengths {
        s.length_unit = LengthUnit::Subwords;
    }
    Ok(s)
}

fn learn_bpe_cmd(run: &mut Run, a: &LearnBpeArgs) -> Result<()> {
    let corpus = lines(run, &a.input)?;
    let model = learn_bpe(&corpus, a.vocab_size)?;
    model.save(&run.path("bpe.model"))?;
    run.produced("bpe.model");
    println!("{} merges", model.merges().len());
    Ok(())
}

fn segment(run: &mut Run, a: &SegmentArgs) -> Result<()> {
    let model = BpeModel::load(run.input(&a.model))?;
    let mut out = String::new();
    for line in lines(run, &a.input)? {
        if a.detokenize {
            out.push_str(&model.detokenize(&words(&line)));
        } else {
            out.push_str(&model.segment(&line).join(" "));
        }
        out.push('\n');
    }
    let name = if a.detokenize { "detokenized.txt" } else { "segmented.txt" };
    run.write(name, &out)
}

fn train_sim_cmd(run: &mut Run, a: &TrainSimArgs, seed: u64) -> Result<()> {
    let mut pairs = load_pairs(run.input(&a.pairs))?;
    if let Some(p) = &a.bpe {
        let bpe = BpeModel::load(run.input(p))?;
        pairs = pairs
            .into_iter()
            .map(|p| ParaphrasePair::new(bpe.segment(&p.s.join(" ")), bpe.segment(&p.s_prime.join(" "))))
            .collect::<Result<_>>()?;
    }
    let config = SimTrainConfig {
        margin: a.margin,
        minibatch_size: a.minibatch,
        megabatch_factor: a.megabatch,
        learning_rate: a.lr,
        epochs: a.epochs,
        seed,
        bidirectional: a.bidirectional,
    };
    config.validate()?;
    let table = match &a.init {
        Some(p) => load_embeddings(run.input(p))?,
        None => {
            let vocab: BTreeSet<&String> = pairs.iter().flat_map(|p| p.s.iter().chain(&p.s_prime)).collect();
            let vocab: Vec<&String> = vocab.into_iter().collect();
            EmbeddingTable::random(&vocab, a.dim, seed)?
        }
    };
    let (trained, log) = train_sim(&table, &pairs, &config)?;
    save_embeddings(&run.path("sim.emb"), &trained)?;
    run.produced("sim.emb");
    let mut csv = String::from("epoch,mean_margin_loss\n");
    for (e, l) in log.epoch_loss.iter().enumerate() {
        let _ = writeln!(csv, "{e},{l}");
    }
    run.write("train_sim_log.csv", &csv)?;
    if let (Some(first), Some(last)) = (log.epoch_loss.first(), log.epoch_loss.last()) {
        println!("margin loss {first:.4} -> {last:.4}");
    }
    Ok(())
}

fn score(run: &mut Run, a: &ScoreArgs) -> Result<()> {
    let (refs, hyps) = aligned(run, &a.refs, &a.hyps)?;
    let mut s = scorer(run, &a.metric)?;
    s.config.scale_hundred = a.scale_hundred;
    let f = |x: f64| s.config.format(x);
    let mut out = String::from("index\tbleu\tsim\tsimile\tlp\n");
    let (mut sim, mut simile, mut lp) = (0.0, 0.0, 0.0);
    let mut rows = Vec::with_capacity(refs.len());
    for (i, (r, h)) in refs.iter().zip(&hyps).enumerate() {
        let sc = s.score(r, h)?;
        let _ = writeln!(out, "{i}\t{:.4}\t{:.4}\t{:.4}\t{:.4}", f(sc.bleu), f(sc.sim), f(sc.simile), sc.lp);
        sim += sc.sim;
        simile += sc.simile;
        lp += sc.lp;
        rows.push(sc);
    }
    let n = refs.len().max(1) as f64;
    let bleu = corpus_bleu(&refs, &hyps, s.config.max_ngram)?;
    let _ = writeln!(
        out,
        "corpus\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
        f(bleu),
        f(sim / n),
        f(simile / n),
        lp / n
    );
    print!("{out}");
    run.write("scores.tsv", &out)?;
    run.write_json(
        "scores.json",
        &json!({
            "corpus": {"bleu": f(bleu), "sim": f(sim / n), "simile": f(simile / n), "lp": lp / n},
            "sentences": rows,
        }),
    )
}

fn filter_pairs(run: &mut Run, a: &FilterPairsArgs) -> Result<()> {
    let pairs = load_pairs(run.input(&a.pairs))?;
    let s = scorer(run, &a.metric)?;
    let cfg = FilterConfig {
        sim_min: a.sim_min,
        trigram_max: a.trigram_max,
    };
    let (kept, stats) = paranmt_filter(&pairs, &s, &cfg)?;
    save_pairs(&run.path("filtered.tsv"), &kept)?;
    run.produced("filtered.tsv");
    println!(
        "kept {} of {} (similarity {}, overlap {}, both {})",
        stats.kept, stats.input, stats.rejected_sim, stats.rejected_overlap, stats.rejected_both
    );
    run.write_json("filter_stats.json", &stats)
}

fn corpus(run: &mut Run, c: &CorpusArgs) -> Result<(Vec<SentencePair>, Vec<SentencePair>)> {
    let mut side = |src: &Path, reference: &Path| -> Result<Vec<SentencePair>> {
        let (s, r) = aligned(run, src, reference)?;
        Ok(s.into_iter().zip(r).collect())
    };
    let train = side(&c.train_src, &c.train_ref)?;
    let valid = side(&c.valid_src, &c.valid_ref)?;
    Ok((train, valid))
}

fn load_model(run: &mut Run, path: &Path) -> Result<ToyLexModel> {
    Ok(serde_json::from_str(&read_text(run.input(path))?)?)
}

fn mle(run: &mut Run, a: &MleTrainArgs, seed: u64) -> Result<()> {
    let (train, valid) = corpus(run, &a.corpus)?;
    let start = match &a.init {
        Some(p) => load_model(run, p)?,
        None => {
            let all: Vec<SentencePair> = train.iter().chain(&valid).cloned().collect();
            ToyLexModel::for_corpus(&all)?
        }
    };
    let o: &OptimArgs = &a.optim;
    let config = MleConfig {
        epsilon: o.epsilon,
        learning_rate: o.lr,
        momentum: o.momentum,
        clip_norm: o.clip,
        epochs: a.epochs,
        batch_size: o.batch_size,
        anneal: !o.no_anneal,
        seed,
        ..MleConfig::default()
    };
    let result = mle_train(&start, &train, &valid, &config)?;
    run.write_json("model.json", &result.model)?;
    let mut csv = String::from("epoch,lr,train_loss,val_loss\n");
    for r in &result.log {
        let _ = writeln!(csv, "{},{},{},{}", r.epoch, r.lr, r.train_loss, r.val_loss);
    }
    run.write("mle_log.csv", &csv)?;
    println!("best epoch {} of {}", result.best_epoch, result.log.len() - 1);
    Ok(())
}

fn risk_setup(
    run: &mut Run,
    a: &RiskArgs,
    k: usize,
    seed: u64,
) -> Result<(ToyLexModel, Vec<SentencePair>, Vec<SentencePair>, SimileScorer, RiskTrainConfig)> {
    let model = load_model(run, &a.model)?;
    let (train, valid) = corpus(run, &a.corpus)?;
    let s = scorer(run, &a.metric)?;
    let o = &a.optim;
    let config = RiskTrainConfig {
        gamma: a.gamma,
        epsilon: o.epsilon,
        k,
        learning_rate: o.lr,
        momentum: o.momentum,
        clip_norm: o.clip,
        anneal: !o.no_anneal,
        epochs: a.epochs,
        batch_size: o.batch_size,
        cost_kind: a.cost,
        seed,
        ..RiskTrainConfig::default()
    };
    config.validate()?;
    Ok((model, train, valid, s, config))
}

fn risk(run: &mut Run, a: &RiskTrainArgs, seed: u64) -> Result<()> {
    let (model, train, valid, s, config) = risk_setup(run, &a.risk, a.k, seed)?;
    let (gamma, result) = if a.tune_gamma {
        tune_gamma(&model, &train, &valid, &config, &s, &GAMMA_GRID)?
    } else {
        (config.gamma, train_risk(&model, &train, &valid, &config, &s)?)
    };
    let csv = risk_log_csv(&result.log);
    print!("{csv}");
    run.write("risk_log.csv", &csv)?;
    run.write_json("risk_model.json", &result.model)?;
    run.write_json("risk_final_model.json", &result.final_model)?;
    run.write_json(
        "risk_summary.json",
        &json!({
            "gamma": gamma,
            "best_epoch": result.best_epoch,
            "checkpoint_epoch1": result.checkpoint_epoch1,
            "best_eval": result.best_eval,
            "final": SweepRow::from_run(a.k, &result),
        }),
    )
}

fn sweep(run: &mut Run, a: &SweepArgs, seed: u64) -> Result<()> {
    let (model, train, valid, s, config) = risk_setup(run, &a.risk, 1, seed)?;
    if a.k.contains(&0) {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let rows = sweep_nbest(&model, &train, &valid, &config, &s, &a.k)?;
    let csv = sweep_csv(&rows);
    print!("{csv}");
    run.write("sweep.csv", &csv)?;
    run.write_json("sweep.json", &rows)
}

fn nbest_lists(run: &mut Run, input: &NbestInput) -> Result<(Vec<NBestList>, SimileScorer)> {
    let cands = load_nbest(run.input(&input.nbest))?;
    let refs = sentences(run, &input.refs)?;
    if cands.len() > refs.len() {
        return Err(Error::LengthMismatch {
            what: "n-best lists vs references",
            left: cands.len(),
            right: refs.len(),
        });
    }
    let lists = cands
        .into_iter()
        .zip(refs)
        .map(|(candidates, reference)| NBestList {
            source: Vec::new(),
            reference,
            candidates,
            exhausted: false,
        })
        .collect();
    Ok((lists, scorer(run, &input.metric)?))
}

fn hist(run: &mut Run, a: &HistArgs) -> Result<()> {
    let (lists, s) = nbest_lists(run, &a.input)?;
    let mut costs = Vec::new();
    for l in &lists {
        for c in &l.candidates {
            costs.push(s.cost(a.cost, &l.reference, &c.tokens)?);
        }
    }
    let h = cost_histogram(&costs, a.bin_width)?;
    print!("{}", h.to_table());
    run.write("hist.csv", &h.to_csv())?;
    run.write_json("hist.json", &h)
}

fn pairs(run: &mut Run, a: &PairsArgs) -> Result<()> {
    let (lists, s) = nbest_lists(run, &a.input)?;
    let bleu = nbest_pair_stats(&score_lists(&lists, |r, h| s.bleu(r, h))?)?;
    let simile = nbest_pair_stats(&score_lists(&lists, |r, h| s.simile(r, h))?)?;
    print!("{}{}", bleu.to_table("BLEU"), simile.to_table("SimiLe"));
    run.write_json("pairs.json", &json!({ "bleu": bleu, "simile": simile }))
}

fn f1(run: &mut Run, a: &F1Args) -> Result<()> {
    if a.refs.len() != a.hyps.len() || (!a.hyps_b.is_empty() && a.hyps_b.len() != a.refs.len()) {
        return Err(Error::InvalidArgument(
            "--refs, --hyps and --hyps-b must be given the same number of times".into(),
        ));
    }
    let tags = match &a.tags {
        Some(p) => Some(load_tags(run.input(p))?),
        None => None,
    };
    let scheme = match &tags {
        Some(t) => BucketScheme::Tags(t),
        None => BucketScheme::Frequency,
    };
    let mut reports = Vec::new();
    let mut deltas = Vec::new();
    let mut table = String::new();
    for (i, (rp, hp)) in a.refs.iter().zip(&a.hyps).enumerate() {
        let name = rp
            .file_stem()
            .map_or_else(|| format!("corpus{i}"), |s| s.to_string_lossy().into_owned());
        let (refs, hyps) = aligned(run, rp, hp)?;
        let ra = lexical_f1(&refs, &hyps, scheme)?;
        let _ = write!(table, "== {name}\n{}", ra.to_table());
        let rb = match a.hyps_b.get(i) {
            Some(bp) => {
                let (_, hb) = aligned(run, rp, bp)?;
                let rb = lexical_f1(&refs, &hb, scheme)?;
                deltas.push((name.clone(), ra.clone(), rb.clone()));
                Some(rb)
            }
            None => None,
        };
        reports.push(json!({ "name": name, "a": ra, "b": rb }));
    }
    let delta = if deltas.is_empty() {
        None
    } else {
        let d = f1_delta_multi(&deltas)?;
        let _ = write!(table, "== delta (x100)\n{}", d.to_table());
        Some(d)
    };
    print!("{table}");
    run.write("f1.txt", &table)?;
    run.write_json("f1.json", &json!({ "reports": reports, "delta": delta }))
}

fn compare(run: &mut Run, a: &CompareArgs) -> Result<()> {
    let refs = sentences(run, &a.refs)?;
    let ha = sentences(run, &a.hyps_a)?;
    let hb = sentences(run, &a.hyps_b)?;
    let s = scorer(run, &a.metric)?;
    let rows = metric_compare_sort(&refs, &ha, &hb, &s, a.extremes)?;
    let table = compare_table(&rows);
    print!("{table}");
    run.write("compare.tsv", &table)?;
    run.write_json("compare.json", &rows)
}

fn metric_fn(s: &SimileScorer, m: MetricName) -> impl Fn(&[String], &[String]) -> Result<f64> + '_ {
    move |r, h| match m {
        MetricName::Bleu => s.bleu(r, h),
        MetricName::Sim => s.sim(r, h),
        MetricName::Simile => s.simile(r, h),
    }
}

fn correlate(run: &mut Run, a: &CorrelateArgs) -> Result<()> {
    let rows = load_judgments(run.input(&a.judgments))?;
    let s = scorer(run, &a.metric)?;
    let f = metric_fn(&s, a.score);
    let mut pairs = Vec::with_capacity(rows.len());
    for j in &rows {
        let sys = if a.symmetric {
            symmetric(&f, &j.reference, &j.hypothesis)?
        } else {
            f(&j.reference, &j.hypothesis)?
        };
        pairs.push((sys, j.human));
    }
    let report = CorrelationReport::compute(&JudgmentSet::new(pairs))?;
    print!("{}", report.to_table());
    run.write_json("correlation.json", &report)
}

fn bootstrap(run: &mut Run, a: &BootstrapArgs, seed: u64) -> Result<()> {
    let refs = sentences(run, &a.refs)?;
    let ha = sentences(run, &a.hyps_a)?;
    let hb = sentences(run, &a.hyps_b)?;
    let metric = match a.score {
        MetricName::Bleu => BootstrapMetric::bleu(&refs, &ha, &hb, MetricConfig::default().max_ngram)?,
        m => {
            let emb = a
                .emb
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("--emb is required for sim and simile".into()))?;
            let m_args = MetricArgs {
                emb: emb.clone(),
                bpe: a.bpe.clone(),
                alpha: MetricConfig::default().alpha,
                subword_lengths: false,
            };
            let s = scorer(run, &m_args)?;
            let f = metric_fn(&s, m);
            if ha.len() != refs.len() || hb.len() != refs.len() {
                return Err(Error::LengthMismatch {
                    what: "system outputs",
                    left: ha.len(),
                    right: hb.len(),
                });
            }
            let score_all = |hyps: &[Vec<String>]| -> Result<Vec<f64>> {
                refs.iter().zip(hyps).map(|(r, h)| f(r, h)).collect()
            };
            BootstrapMetric::mean(score_all(&ha)?, score_all(&hb)?)?
        }
    };
    let result = paired_bootstrap(&metric, a.samples, seed)?;
    print!("{}", result.to_table());
    run.write_json("bootstrap.json", &result)
}
