//! Offline stand-in for an LLM worker, driven by ground-truth labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Guess, WorkerAnnotation};
use crate::graph::{DirectedTag, HomophilyTie, NUM_CONFIGS};

/// Plurality ground-truth label over the tie, the center counting twice.
/// Ties prefer the center's label, then the lowest class index.
pub fn tie_plurality(tie: &HomophilyTie, graph: &DirectedTag) -> usize {
    let mut votes = vec![0usize; graph.num_classes().max(1)];
    for (i, &m) in tie.members.iter().enumerate() {
        if let Some(l) = graph.label(m) {
            votes[l] += if i == 0 { 2 } else { 1 };
        }
    }
    let best = *votes.iter().max().unwrap_or(&0);
    match graph.label(tie.center) {
        Some(c) if votes[c] == best => c,
        _ => votes.iter().position(|&v| v == best).unwrap_or(0),
    }
}

/// Deterministic noisy worker.
///
/// With probability `1 - noise` it answers the tie's plurality label,
/// otherwise a label drawn uniformly from all classes. The answer gets
/// confidence `round(100 - 40 * noise)`; the rest is spread evenly over the
/// remaining classes. The random stream is keyed by `(seed, center, k)`.
pub fn synthetic_oracle(tie: &HomophilyTie, graph: &DirectedTag, noise: f64, seed: u64) -> WorkerAnnotation {
    let noise = noise.clamp(0.0, 1.0);
    let classes = graph.class_names();
    let num_classes = classes.len();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tie.center * NUM_CONFIGS + tie.config_k) as u64);
    let truthful = rng.random::<f64>() >= noise;
    let answer = if truthful {
        tie_plurality(tie, graph)
    } else {
        rng.random_range(0..num_classes)
    };

    let top = (100.0 - 40.0 * noise).round() as u32;
    let rest = 100 - top;
    let others = (num_classes - 1).max(1) as u32;
    let mut guesses = vec![Guess {
        label: classes[answer].clone(),
        confidence: top,
    }];
    for (j, c) in (0..num_classes).filter(|&c| c != answer).enumerate() {
        let extra = u32::from((j as u32) < rest % others);
        guesses.push(Guess {
            label: classes[c].clone(),
            confidence: rest / others + extra,
        });
    }

    let raw_response = serde_json::to_string(
        &guesses
            .iter()
            .map(|g| serde_json::json!({"answer": g.label, "confidence": g.confidence}))
            .collect::<Vec<_>>(),
    )
    .expect("serializing plain JSON values");

    WorkerAnnotation {
        center: tie.center,
        config_k: tie.config_k,
        guesses,
        raw_response,
        tokens_in: 0,
        tokens_out: 0,
        from_cache: false,
        unparseable: false,
    }
}
