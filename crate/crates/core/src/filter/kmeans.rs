use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centers: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every assignment step.
    pub inertia_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the closest center.
pub fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centers = vec![points[first].clone()];
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = (0..n).filter(|&i| !chosen[i]).map(|i| dist[i]).sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for i in (0..n).filter(|&i| !chosen[i]) {
                target -= dist[i];
                if target <= 0.0 && dist[i] > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| (0..n).rev().find(|&i| !chosen[i] && dist[i] > 0.0).unwrap())
        } else {
            // Only duplicates of existing centers remain.
            (0..n).find(|&i| !chosen[i]).expect("n >= k")
        };
        chosen[pick] = true;
        centers.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            dist[i] = dist[i].min(sq_dist(p, &points[pick]));
        }
    }
    centers
}

/// k-means++ seeding followed by Lloyd iterations.
///
/// Stops when no center moves more than `tol` (Euclidean) or after
/// `max_iter` rounds. An empty cluster is re-seeded at the point farthest
/// from its current center.
pub fn kmeans(points: &[Vec<f64>], cfg: &KMeansConfig) -> Result<ClusterModel> {
    let n = points.len();
    let k = cfg.k;
    if k == 0 || n < k {
        return Err(Error::TooFewPoints { n, k });
    }
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centers = plus_plus_init(points, k, &mut rng);
    let mut assignment = vec![0; n];
    let mut history = Vec::new();

    for _ in 0..cfg.max_iter.max(1) {
        let mut inertia = 0.0;
        let mut dist = vec![0.0; n];
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centers);
            assignment[i] = c;
            dist[i] = d;
            inertia += d;
        }

        let mut counts = vec![0usize; k];
        for &c in &assignment {
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] != 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[assignment[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                counts[assignment[i]] -= 1;
                inertia -= dist[i];
                assignment[i] = c;
                counts[c] = 1;
                dist[i] = 0.0;
            }
        }
        history.push(inertia);

        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &c) in points.iter().zip(&assignment) {
            sums[c].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        let mut moved: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let mean: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            moved = moved.max(sq_dist(&mean, &centers[c]).sqrt());
            centers[c] = mean;
        }
        if moved < cfg.tol {
            break;
        }
    }

    let mut inertia = 0.0;
    for (i, p) in points.iter().enumerate() {
        let (c, d) = nearest(p, &centers);
        assignment[i] = c;
        inertia += d;
    }
    history.push(inertia);
    Ok(ClusterModel {
        centers,
        assignment,
        inertia,
        inertia_history: history,
    })
}

/// `1 / (1 + distance to the nearest center)`.
pub fn c_density(point: &[f64], model: &ClusterModel) -> f64 {
    1.0 / (1.0 + nearest(point, &model.centers).1.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn cfg(k: usize, seed: u64) -> KMeansConfig {
        KMeansConfig {
            k,
            seed,
            max_iter: 300,
            tol: 1e-9,
        }
    }

    pub(crate) fn non_increasing(h: &[f64]) -> bool {
        h.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12)
    }

    #[test]
    fn k_equals_n() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 5.0], vec![-3.0, 2.0]];
        let m = kmeans(&pts, &cfg(3, 1)).unwrap();
        assert_eq!(m.inertia, 0.0);
        let mut a = m.assignment.clone();
        a.sort();
        assert_eq!(a, vec![0, 1, 2]);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(kmeans(&[vec![1.0]], &cfg(2, 0)), Err(Error::TooFewPoints { n: 1, k: 2 })));
    }

    #[test]
    fn two_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let means = [[0.0, 0.0], [6.0, 4.0]];
        let mut pts = Vec::new();
        for m in means {
            for _ in 0..200 {
                pts.push(vec![m[0] + noise.sample(&mut rng), m[1] + noise.sample(&mut rng)]);
            }
        }
        // Oracle: empirical blob means.
        let blob_mean = |b: usize| -> Vec<f64> {
            let s = &pts[b * 200..(b + 1) * 200];
            (0..2).map(|j| s.iter().map(|p| p[j]).sum::<f64>() / 200.0).collect()
        };
        let m = kmeans(&pts, &cfg(2, 42)).unwrap();
        for b in 0..2 {
            let want = blob_mean(b);
            let (_, d) = nearest(&want, &m.centers);
            assert!(d.sqrt() < 0.1);
        }
        assert!(non_increasing(&m.inertia_history), "{:?}", m.inertia_history);
        assert_eq!(m, kmeans(&pts, &cfg(2, 42)).unwrap());
    }

    #[test]
    fn density_values() {
        let model = ClusterModel {
            centers: vec![vec![0.0, 0.0]],
            assignment: vec![],
            inertia: 0.0,
            inertia_history: vec![],
        };
        assert_eq!(c_density(&[0.0, 0.0], &model), 1.0);
        assert_eq!(c_density(&[1.0, 0.0], &model), 0.5);
        assert_eq!(c_density(&[0.0, 3.0], &model), 0.25);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn inertia_never_increases(
                pts in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 8..60),
                k in 1usize..6,
                seed in any::<u64>(),
            ) {
                let m = kmeans(&pts, &cfg(k, seed)).unwrap();
                prop_assert!(non_increasing(&m.inertia_history));
                for (p, &c) in pts.iter().zip(&m.assignment) {
                    prop_assert_eq!(nearest(p, &m.centers).0, c);
                }
            }
        }
    }
}
