//! Regenerates the bundled 30-node fixture and its recorded response cache.
//!
//! Run from the crate root: `cargo run --example make_fixture`.

use std::fs;
use std::path::Path;

use graph_annotate::annotator::{build_prompt, CacheRecord, ResponseCache, TruncationPolicy};
use graph_annotate::graph::NUM_CONFIGS;
use graph_annotate::synth::{generate, SynthConfig};

fn main() -> graph_annotate::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    fs::create_dir_all(&dir).expect("create fixtures dir");
    let mut cfg = SynthConfig::new(30, 3, 7);
    cfg.class_names = vec![
        "Genetic_Algorithms".into(),
        "Neural_Networks".into(),
        "Reinforcement_Learning".into(),
    ];
    let s = generate(&cfg)?;
    fs::write(dir.join("tiny.content"), s.content_file()).expect("write content");
    fs::write(dir.join("tiny.cites"), s.cites_file()).expect("write cites");
    fs::write(dir.join("tiny.texts"), s.texts_file()).expect("write texts");

    // A recorded cache where every worker answers with the true label first.
    let (graph, _) = s.assemble()?;
    let model = "gpt-3.5-turbo";
    let path = dir.join("tiny_cache.jsonl");
    let _ = fs::remove_file(&path);
    let mut cache = ResponseCache::open(&path)?;
    for v in 0..graph.num_nodes() {
        let truth = graph.label(v).expect("fixture is fully labeled");
        let other = (truth + 1) % graph.num_classes();
        for k in 0..NUM_CONFIGS {
            let tie = graph.homophily_tie(v, k)?;
            let spec = build_prompt(&tie, graph.texts(), graph.class_names(), &TruncationPolicy::default(), model);
            let body = format!(
                "[{{\"answer\": \"{}\", \"confidence\": 80}}, {{\"answer\": \"{}\", \"confidence\": 20}}]",
                graph.class_names()[truth],
                graph.class_names()[other]
            );
            cache.insert(CacheRecord {
                hash: spec.prompt_hash.clone(),
                model: model.into(),
                prompt: spec.body.clone(),
                raw_response: body,
                tokens_in: 200,
                tokens_out: 30,
                timestamp: 0,
            })?;
        }
    }
    println!("wrote fixtures to {}", dir.display());
    Ok(())
}
