use crate::error::{Error, Result};
use crate::graph::DirectedTag;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        PageRankConfig {
            damping: 0.85,
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

/// Power iteration with uniform teleport. Mass sitting on nodes without
/// out-edges is spread uniformly. Stops once the L1 change drops below `tol`.
pub fn pagerank(graph: &DirectedTag, cfg: &PageRankConfig) -> Result<Vec<f64>> {
    let n = graph.num_nodes();
    if n == 0 {
        return Err(Error::Empty("pagerank on an empty graph".into()));
    }
    let nf = n as f64;
    let d = cfg.damping;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut delta = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let dangling: f64 = (0..n)
            .filter(|&u| graph.out_degree(u) == 0)
            .map(|u| rank[u])
            .sum();
        let base = (1.0 - d) / nf + d * dangling / nf;
        next.iter_mut().for_each(|x| *x = base);
        for (u, v) in graph.edges() {
            next[v] += d * rank[u] / graph.out_degree(u) as f64;
        }
        delta = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if delta < cfg.tol {
            // Undo accumulated drift so the vector sums to one.
            let total: f64 = rank.iter().sum();
            rank.iter_mut().for_each(|x| *x /= total);
            return Ok(rank);
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iter,
        delta,
    })
}
