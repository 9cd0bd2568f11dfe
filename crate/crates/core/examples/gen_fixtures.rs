//! Regenerates the bundled synthetic fixtures under `fixtures/synthetic`.
//!
//! Run with `cargo run -p simile-core --example gen_fixtures`.

use std::path::Path;

use simile_core::data::{save_embeddings, save_nbest, save_parallel, write_text, ParallelCorpus};
use simile_core::metrics::CostKind;
use simile_core::synth::{default_scorer, default_task, nbest_fixture, pretrained_model};

fn main() -> simile_core::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let task = default_task();
    let scorer = default_scorer();

    let train = ParallelCorpus::from_pairs("train", &task.train)?;
    let valid = ParallelCorpus::from_pairs("valid", &task.valid)?;
    save_parallel(&train, &dir.join("train.src"), &dir.join("train.ref"))?;
    save_parallel(&valid, &dir.join("valid.src"), &dir.join("valid.ref"))?;
    save_embeddings(&dir.join("sim.emb"), &scorer.table)?;

    let model = pretrained_model(&task)?;
    write_text(&dir.join("pretrained.json"), &serde_json::to_string_pretty(&model)?)?;
    let lists = nbest_fixture(&model, &task.valid, 8, &scorer, CostKind::SimileCost)?;
    save_nbest(&dir.join("valid.nbest"), &lists)?;
    println!("wrote fixtures to {}", dir.display());
    Ok(())
}
