//! The committed synthetic fixtures match what the generator produces today.

use std::path::Path;

use simile_core::data::{load_embeddings, load_nbest, load_parallel, read_text};
use simile_core::metrics::CostKind;
use simile_core::riskopt::ToyLexModel;
use simile_core::synth::{default_scorer, default_task, nbest_fixture, pretrained_model};

#[test]
fn committed_fixtures_match_generator() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let task = default_task();
    let scorer = default_scorer();

    let train = load_parallel(&dir.join("train.src"), &dir.join("train.ref")).unwrap();
    let valid = load_parallel(&dir.join("valid.src"), &dir.join("valid.ref")).unwrap();
    assert_eq!(train.pairs(), task.train);
    assert_eq!(valid.pairs(), task.valid);
    assert_eq!(load_embeddings(&dir.join("sim.emb")).unwrap(), scorer.table);

    let model = pretrained_model(&task).unwrap();
    let committed: ToyLexModel = serde_json::from_str(&read_text(&dir.join("pretrained.json")).unwrap()).unwrap();
    assert_eq!(committed, model);

    let lists = nbest_fixture(&model, &task.valid, 8, &scorer, CostKind::SimileCost).unwrap();
    let loaded = load_nbest(&dir.join("valid.nbest")).unwrap();
    assert_eq!(loaded.len(), lists.len());
    for (got, want) in loaded.iter().zip(&lists) {
        assert_eq!(got.len(), want.candidates.len());
        for (g, w) in got.iter().zip(&want.candidates) {
            assert_eq!(g.tokens, w.tokens);
            assert_eq!(g.logprob.to_bits(), w.logprob.to_bits());
        }
    }
}
