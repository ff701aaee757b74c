//! Two-stage active node filter.
//!
//! Stage 1 ranks annotated nodes by a convex mix of PageRank, cluster density
//! and degree, each min-max normalized over the candidate pool, and keeps the
//! top `K`. Stage 2 re-ranks those by leave-one-out change of label entropy
//! plus aggregated annotation confidence (both normalized over the stage-1
//! set) and keeps the top `ceil(K * eta)`.

pub mod kmeans;
pub mod pagerank;

use serde::{Deserialize, Serialize};

use crate::aggregate::PseudoLabel;
use crate::error::{Error, Result};
use crate::graph::{DirectedTag, NodeId};

pub use kmeans::{c_density, kmeans, ClusterModel, KMeansConfig};
pub use pagerank::{pagerank, PageRankConfig};

/// Stage-1 weights. The degree weight is always `1 - gamma - lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage1Weights {
    gamma: f64,
    lambda: f64,
}

impl Stage1Weights {
    pub fn new(gamma: f64, lambda: f64) -> Result<Self> {
        if !(gamma >= 0.0 && lambda >= 0.0) {
            return Err(Error::Validation(format!(
                "gamma ({gamma}) and lambda ({lambda}) must be non-negative"
            )));
        }
        if gamma + lambda > 1.0 + 1e-12 {
            return Err(Error::Validation(format!(
                "gamma + lambda = {} exceeds 1",
                gamma + lambda
            )));
        }
        Ok(Stage1Weights { gamma, lambda })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> f64 {
        (1.0 - self.gamma - self.lambda).max(0.0)
    }
}

/// Min-max scaling to `[0, 1]`; a constant vector maps to all zeros.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// `gamma * P + lambda * D + (1 - gamma - lambda) * Deg` on normalized inputs.
pub fn stage1_scores(pagerank: &[f64], density: &[f64], degree: &[f64], w: Stage1Weights) -> Vec<f64> {
    let (p, d, g) = (min_max(pagerank), min_max(density), min_max(degree));
    (0..p.len())
        .map(|i| w.gamma * p[i] + w.lambda * d[i] + w.theta() * g[i])
        .collect()
}

/// The `k` best `(node, score)` pairs by score descending, then id ascending.
pub fn select_top_k(scores: &[(NodeId, f64)], k: usize) -> Result<Vec<NodeId>> {
    if k > scores.len() {
        return Err(Error::SelectionTooLarge {
            k,
            available: scores.len(),
        });
    }
    let mut order: Vec<(NodeId, f64)> = scores.to_vec();
    order.sort_by(|a, b| {
        let (sa, sb) = (nan_low(a.1), nan_low(b.1));
        sb.total_cmp(&sa).then(a.0.cmp(&b.0))
    });
    Ok(order.into_iter().take(k).map(|(v, _)| v).collect())
}

fn nan_low(x: f64) -> f64 {
    if x.is_nan() {
        f64::NEG_INFINITY
    } else {
        x
    }
}

/// Shannon entropy (nats) of a label histogram given `sum c ln c` and total.
fn entropy_from_parts(total: usize, c_ln_c: f64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    (n.ln() - c_ln_c / n).max(0.0)
}

fn x_ln_x(c: usize) -> f64 {
    if c == 0 {
        0.0
    } else {
        let x = c as f64;
        x * x.ln()
    }
}

/// Leave-one-out change of entropy for every entry of `labels`:
/// `H(labels without i) - H(labels)`.
pub fn coe(labels: &[usize]) -> Vec<f64> {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; classes];
    for &l in labels {
        counts[l] += 1;
    }
    let total = labels.len();
    let s: f64 = counts.iter().map(|&c| x_ln_x(c)).sum();
    let h_all = entropy_from_parts(total, s);
    labels
        .iter()
        .map(|&l| {
            let c = counts[l];
            let s_without = s - x_ln_x(c) + x_ln_x(c - 1);
            entropy_from_parts(total - 1, s_without) - h_all
        })
        .collect()
}

/// Number of nodes kept by stage 2.
pub fn stage2_count(k: usize, eta: f64) -> usize {
    // Guards against products like 100 * 0.15 = 15.000000000000002.
    ((k as f64 * eta) - 1e-9).ceil().max(0.0) as usize
}

/// Stage-2 selection over the stage-1 set.
pub fn stage2_select(selected: &[NodeId], coe: &[f64], confidence: &[f64], eta: f64) -> Result<Vec<NodeId>> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Validation(format!("eta must be in (0, 1], got {eta}")));
    }
    let s2 = stage2_scores(coe, confidence);
    let scored: Vec<(NodeId, f64)> = selected.iter().copied().zip(s2).collect();
    select_top_k(&scored, stage2_count(selected.len(), eta))
}

pub fn stage2_scores(coe: &[f64], confidence: &[f64]) -> Vec<f64> {
    min_max(coe)
        .into_iter()
        .zip(min_max(confidence))
        .map(|(a, b)| a + b)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub gamma: f64,
    pub lambda: f64,
    pub eta: f64,
    /// Stage-1 size.
    pub k: usize,
    pub kmeans_seed: u64,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub pagerank: PageRankConfig,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            gamma: 0.02,
            lambda: 0.78,
            eta: 0.15,
            k: 934,
            kmeans_seed: 0,
            kmeans_max_iter: 300,
            kmeans_tol: 1e-6,
            pagerank: PageRankConfig::default(),
        }
    }
}

/// Default stage-1 size for a final training budget: `ceil(budget / eta)`.
pub fn default_k(budget: usize, eta: f64) -> usize {
    ((budget as f64 / eta) - 1e-9).ceil() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    None,
    Stage1,
    Stage2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeScores {
    pub node: NodeId,
    pub pagerank: f64,
    pub density: f64,
    pub degree: usize,
    pub s1: f64,
    /// Present for stage-1 nodes only.
    pub coe: Option<f64>,
    pub confidence: f64,
    pub s2: Option<f64>,
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    /// One row per annotated node, in id order.
    pub scores: Vec<NodeScores>,
    pub stage1: Vec<NodeId>,
    pub stage2: Vec<NodeId>,
    pub clusters: ClusterModel,
}

/// Runs both stages on nodes that carry a pseudo-label.
pub fn run_filter(graph: &DirectedTag, pseudo: &[PseudoLabel], params: &FilterParams) -> Result<FilterOutcome> {
    let weights = Stage1Weights::new(params.gamma, params.lambda)?;
    if !(params.eta > 0.0 && params.eta <= 1.0) {
        return Err(Error::Validation(format!("eta must be in (0, 1], got {}", params.eta)));
    }
    let pool: Vec<&PseudoLabel> = pseudo.iter().filter(|p| p.label.is_some()).collect();
    if pool.is_empty() {
        return Err(Error::Empty("no annotated nodes to filter".into()));
    }

    let pr = pagerank(graph, &params.pagerank)?;
    let clusters = kmeans(
        graph.features(),
        &KMeansConfig {
            k: graph.num_classes(),
            seed: params.kmeans_seed,
            max_iter: params.kmeans_max_iter,
            tol: params.kmeans_tol,
        },
    )?;

    let nodes: Vec<NodeId> = pool.iter().map(|p| p.node).collect();
    let p: Vec<f64> = nodes.iter().map(|&v| pr[v]).collect();
    let d: Vec<f64> = nodes.iter().map(|&v| c_density(&graph.features()[v], &clusters)).collect();
    let deg: Vec<usize> = nodes.iter().map(|&v| graph.in_degree(v) + graph.out_degree(v)).collect();
    let deg_f: Vec<f64> = deg.iter().map(|&x| x as f64).collect();
    let s1 = stage1_scores(&p, &d, &deg_f, weights);

    let scored: Vec<(NodeId, f64)> = nodes.iter().copied().zip(s1.iter().copied()).collect();
    let stage1 = select_top_k(&scored, params.k)?;

    let pos: std::collections::HashMap<NodeId, usize> =
        nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let s1_labels: Vec<usize> = stage1.iter().map(|v| pool[pos[v]].label.expect("pool is labeled")).collect();
    let s1_conf: Vec<f64> = stage1.iter().map(|v| pool[pos[v]].confidence).collect();
    let s1_coe = coe(&s1_labels);
    let s2 = stage2_scores(&s1_coe, &s1_conf);
    let stage2 = stage2_select(&stage1, &s1_coe, &s1_conf, params.eta)?;

    let mut scores: Vec<NodeScores> = (0..nodes.len())
        .map(|i| NodeScores {
            node: nodes[i],
            pagerank: p[i],
            density: d[i],
            degree: deg[i],
            s1: s1[i],
            coe: None,
            confidence: pool[i].confidence,
            s2: None,
            stage: Stage::None,
        })
        .collect();
    for (j, v) in stage1.iter().enumerate() {
        let row = &mut scores[pos[v]];
        row.coe = Some(s1_coe[j]);
        row.s2 = Some(s2[j]);
        row.stage = Stage::Stage1;
    }
    for v in &stage2 {
        scores[pos[v]].stage = Stage::Stage2;
    }
    Ok(FilterOutcome {
        scores,
        stage1,
        stage2,
        clusters,
    })
}
