//! Label propagation under a symmetric homophily model.
//!
//! A neighbor keeps the node's label with probability `alpha` and takes each
//! other label with probability `beta = (1 - alpha) / (|Y| - 1)`. The
//! transition matrix is `Q = (alpha - beta) I + beta J`, whose `h`-th power
//! has the closed form `(alpha - beta)^h I + (1 - (alpha - beta)^h) / |Y| J`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EIGEN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomophilyParams {
    alpha: f64,
    num_classes: usize,
}

impl HomophilyParams {
    pub fn new(alpha: f64, num_classes: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Validation(format!("alpha must be in [0, 1], got {alpha}")));
        }
        if num_classes < 2 {
            return Err(Error::Validation(format!("need at least 2 classes, got {num_classes}")));
        }
        Ok(HomophilyParams { alpha, num_classes })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn beta(&self) -> f64 {
        (1.0 - self.alpha) / (self.num_classes - 1) as f64
    }

    /// `alpha - beta`, the non-unit eigenvalue of `Q`.
    pub fn contraction(&self) -> f64 {
        self.alpha - self.beta()
    }
}

pub fn build_q(p: &HomophilyParams) -> DMatrix<f64> {
    let n = p.num_classes;
    let beta = p.beta();
    DMatrix::from_fn(n, n, |i, j| if i == j { p.alpha } else { beta })
}

pub fn q_power_closed_form(p: &HomophilyParams, h: u32) -> DMatrix<f64> {
    let n = p.num_classes;
    match h {
        0 => DMatrix::identity(n, n),
        1 => build_q(p),
        _ => {
            let g = p.contraction().powi(h as i32);
            let off = (1.0 - g) / n as f64;
            DMatrix::from_fn(n, n, |i, j| if i == j { g + off } else { off })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    /// `[Q^h]_ii - [Q^h]_ij`.
    pub gap: f64,
    /// Strict: the own label is more likely than any single other label.
    pub dominant: bool,
    pub non_strict: bool,
}

pub fn dominance_gap(p: &HomophilyParams, h: u32) -> Dominance {
    let gap = p.contraction().powi(h as i32);
    Dominance {
        gap,
        dominant: gap > 0.0,
        non_strict: gap >= 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    /// Descending.
    pub computed: Vec<f64>,
    pub expected: Vec<f64>,
    pub max_abs_error: f64,
    pub pass: bool,
}

/// Numerical eigenvalues of `Q` against `{1, alpha - beta (x |Y|-1)}`.
pub fn eigen_check(p: &HomophilyParams) -> EigenReport {
    let mut computed: Vec<f64> = SymmetricEigen::new(build_q(p)).eigenvalues.iter().copied().collect();
    computed.sort_by(|a, b| b.total_cmp(a));
    let mut expected = vec![1.0];
    expected.extend(std::iter::repeat_n(p.contraction(), p.num_classes - 1));
    expected.sort_by(|a, b| b.total_cmp(a));
    let max_abs_error = computed
        .iter()
        .zip(&expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    EigenReport {
        computed,
        expected,
        max_abs_error,
        pass: max_abs_error < EIGEN_TOL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopEstimate {
    pub hop: u32,
    /// Empirical probability that a node at this depth shares the root label.
    pub fraction: f64,
    /// Standard error computed over per-root fractions.
    pub std_error: f64,
    pub samples: usize,
}

/// Monte Carlo over `num_roots` independent trees of depth `h`.
///
/// Root `r` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `r`, so any
/// root can be reproduced alone.
pub fn simulate_propagation(p: &HomophilyParams, h: u32, num_roots: usize, fanout: usize, seed: u64) -> Result<Vec<HopEstimate>> {
    if h == 0 || fanout == 0 || num_roots == 0 {
        return Err(Error::Validation("hops, fanout and num_roots must be at least 1".into()));
    }
    let y = p.num_classes;
    let hops = h as usize;
    // per_root[j][r]: same-label fraction at depth j+1 in tree r.
    let mut per_root = vec![Vec::with_capacity(num_roots); hops];
    let mut level = Vec::new();
    let mut next = Vec::new();
    for r in 0..num_roots {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let root = rng.random_range(0..y);
        level.clear();
        level.push(root);
        for depth in per_root.iter_mut() {
            next.clear();
            for &parent in &level {
                for _ in 0..fanout {
                    let child = if rng.random::<f64>() < p.alpha {
                        parent
                    } else {
                        let k = rng.random_range(0..y - 1);
                        if k >= parent {
                            k + 1
                        } else {
                            k
                        }
                    };
                    next.push(child);
                }
            }
            let same = next.iter().filter(|&&c| c == root).count();
            depth.push(same as f64 / next.len() as f64);
            std::mem::swap(&mut level, &mut next);
        }
    }
    Ok(per_root
        .iter()
        .enumerate()
        .map(|(j, fr)| {
            let n = fr.len() as f64;
            let mean = fr.iter().sum::<f64>() / n;
            let var = if fr.len() > 1 {
                fr.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            HopEstimate {
                hop: j as u32 + 1,
                fraction: mean,
                std_error: (var / n).sqrt(),
                samples: fr.len() * fanout.pow(j as u32 + 1),
            }
        })
        .collect())
}

/// Roots needed so that depth `h` holds at least `samples` nodes.
pub fn roots_for_samples(samples: usize, fanout: usize, h: u32) -> usize {
    let per_tree = fanout.saturating_pow(h).max(1);
    samples.div_ceil(per_tree).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremRow {
    pub hop: u32,
    pub diag: f64,
    pub off_diag: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub gap: f64,
    pub dominant: bool,
    /// Empirical fraction within three standard errors of the diagonal.
    pub pass: bool,
}

pub fn verify_theorem(p: &HomophilyParams, hops: u32, samples: usize, fanout: usize, seed: u64) -> Result<Vec<TheoremRow>> {
    let roots = roots_for_samples(samples, fanout, hops);
    let sim = simulate_propagation(p, hops, roots, fanout, seed)?;
    Ok(sim
        .into_iter()
        .map(|est| {
            let q = q_power_closed_form(p, est.hop);
            let diag = q[(0, 0)];
            let off = q[(0, 1)];
            let d = dominance_gap(p, est.hop);
            let err = (est.fraction - diag).abs();
            TheoremRow {
                hop: est.hop,
                diag,
                off_diag: off,
                empirical: est.fraction,
                std_error: est.std_error,
                gap: d.gap,
                dominant: d.dominant,
                pass: err <= 3.0 * est.std_error || err < 1e-12,
            }
        })
        .collect())
}

/// `alpha = i / 20` for `i = 0..=20`.
pub fn alpha_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}
