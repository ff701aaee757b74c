//! Fusing the eight workers of a node into one pseudo-label.
//!
//! Each parseable worker contributes one unit of mass, spread over classes in
//! proportion to its stated confidences (uniformly if they sum to zero). The
//! class with the largest total wins; its share of the total mass is the
//! node's confidence.

use serde::{Deserialize, Serialize};

use crate::annotator::WorkerAnnotation;
use crate::error::{Error, Result};
use crate::graph::{NodeId, NUM_CONFIGS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabel {
    pub node: NodeId,
    /// `None` when no worker produced a usable answer.
    pub label: Option<usize>,
    pub confidence: f64,
    /// Top-1 (class, confidence) per worker in input order; `None` for
    /// unparseable workers.
    pub per_worker_top1: Vec<Option<(usize, u32)>>,
    pub unparseable_count: usize,
}

fn class_index(class_names: &[String], label: &str) -> Option<usize> {
    class_names.iter().position(|c| c == label)
}

/// Normalized class masses of one worker, or `None` if it is unusable.
pub fn worker_masses(w: &WorkerAnnotation, class_names: &[String]) -> Option<Vec<f64>> {
    if w.unparseable {
        return None;
    }
    let mut mass = vec![0.0; class_names.len()];
    let mut any = false;
    for g in &w.guesses {
        if let Some(c) = class_index(class_names, &g.label) {
            mass[c] += f64::from(g.confidence);
            any = true;
        }
    }
    if !any {
        return None;
    }
    let total: f64 = mass.iter().sum();
    if total > 0.0 {
        mass.iter_mut().for_each(|m| *m /= total);
    } else {
        let u = 1.0 / class_names.len() as f64;
        mass.iter_mut().for_each(|m| *m = u);
    }
    Some(mass)
}

/// Confidence-weighted soft vote. Ties go to the lowest class index.
pub fn aggregate(node: NodeId, workers: &[WorkerAnnotation], class_names: &[String]) -> PseudoLabel {
    let mut scores = vec![0.0; class_names.len()];
    let mut usable = 0usize;
    let mut per_worker_top1 = Vec::with_capacity(workers.len());
    for w in workers {
        match worker_masses(w, class_names) {
            Some(m) => {
                usable += 1;
                scores.iter_mut().zip(&m).for_each(|(s, x)| *s += x);
                per_worker_top1.push(
                    w.guesses
                        .iter()
                        .find_map(|g| class_index(class_names, &g.label).map(|c| (c, g.confidence))),
                );
            }
            None => per_worker_top1.push(None),
        }
    }
    let unparseable_count = workers.len() - usable;
    if usable == 0 {
        return PseudoLabel {
            node,
            label: None,
            confidence: 0.0,
            per_worker_top1,
            unparseable_count,
        };
    }
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = c;
        }
    }
    PseudoLabel {
        node,
        label: Some(best),
        confidence: (scores[best] / usable as f64).clamp(0.0, 1.0),
        per_worker_top1,
        unparseable_count,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerAccuracy {
    pub config_k: usize,
    pub accuracy: f64,
    /// Nodes evaluated for this worker.
    pub n: usize,
    /// Set when every response of this worker was unparseable.
    pub all_unparseable: bool,
}

/// Top-1 accuracy of each configuration's worker against ground truth.
///
/// `annotations[v]` holds node `v`'s workers; nodes without ground truth are
/// skipped. Unparseable answers count as wrong.
pub fn worker_accuracy(
    annotations: &[Vec<WorkerAnnotation>],
    ground_truth: &[Option<usize>],
    class_names: &[String],
) -> Result<Vec<WorkerAccuracy>> {
    let mut hits = [0usize; NUM_CONFIGS];
    let mut seen = [0usize; NUM_CONFIGS];
    let mut parsed = [0usize; NUM_CONFIGS];
    for (node_workers, truth) in annotations.iter().zip(ground_truth) {
        let Some(truth) = truth else { continue };
        for w in node_workers {
            let k = w.config_k;
            if k >= NUM_CONFIGS {
                continue;
            }
            seen[k] += 1;
            if let Some(top) = w.top1() {
                parsed[k] += 1;
                if class_index(class_names, &top.label) == Some(*truth) {
                    hits[k] += 1;
                }
            }
        }
    }
    if seen.iter().all(|&s| s == 0) {
        return Err(Error::Empty("no labeled nodes to evaluate worker accuracy on".into()));
    }
    Ok((0..NUM_CONFIGS)
        .map(|k| WorkerAccuracy {
            config_k: k,
            accuracy: if seen[k] == 0 { 0.0 } else { hits[k] as f64 / seen[k] as f64 },
            n: seen[k],
            all_unparseable: seen[k] > 0 && parsed[k] == 0,
        })
        .collect())
}

/// Fraction of labeled, annotated nodes whose pseudo-label is correct.
pub fn pseudo_label_accuracy(labels: &[PseudoLabel], ground_truth: &[Option<usize>]) -> Option<f64> {
    let (mut hit, mut n) = (0usize, 0usize);
    for p in labels {
        if let (Some(l), Some(t)) = (p.label, ground_truth[p.node]) {
            n += 1;
            hit += usize::from(l == t);
        }
    }
    (n > 0).then(|| hit as f64 / n as f64)
}
