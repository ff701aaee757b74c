//! Two-layer graph convolutional network with hand-written backprop.
//!
//! `logits = Â · dropout(ReLU(Â · X · W1)) · W2`, trained with Adam on the
//! mean cross-entropy of the training rows plus `(wd / 2) * (|W1|² + |W2|²)`.

pub mod adjacency;

use ndarray::{Array2, ArrayView2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirectedTag, NodeId};

pub use adjacency::{Csr, NormAdj, DENSE_LIMIT};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_VAL_SIZE: usize = 500;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GcnConfig {
    pub hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig {
            hidden: 16,
            lr: 0.01,
            weight_decay: 5e-4,
            dropout: 0.5,
            epochs: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub config: GcnConfig,
}

/// Dense `n x d` feature matrix of a graph.
pub fn feature_matrix(graph: &DirectedTag) -> Array2<f64> {
    let (n, d) = (graph.num_nodes(), graph.feature_dim());
    Array2::from_shape_fn((n, d), |(i, j)| graph.features()[i][j])
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..=limit))
}

fn relu(m: &Array2<f64>) -> Array2<f64> {
    m.mapv(|x| x.max(0.0))
}

fn log_softmax_row(row: ndarray::ArrayView1<f64>) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    row.iter().map(|x| x - lse).collect()
}

/// Row-wise softmax.
pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let ls = log_softmax_row(row.view());
        row.iter_mut().zip(ls).for_each(|(x, l)| *x = l.exp());
    }
    out
}

fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (c, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = c;
        }
    }
    best
}

/// Argmax accuracy over `(node, label)` pairs; ties pick the lowest class.
pub fn evaluate(logits: &Array2<f64>, nodes: &[(NodeId, usize)]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes.iter().filter(|&&(v, y)| argmax(logits.row(v)) == y).count();
    hits as f64 / nodes.len() as f64
}

struct Grads {
    loss: f64,
    w1: Array2<f64>,
    w2: Array2<f64>,
}

struct Adam {
    m: Array2<f64>,
    v: Array2<f64>,
}

impl Adam {
    fn new(shape: (usize, usize)) -> Self {
        Adam {
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
        }
    }

    fn step(&mut self, w: &mut Array2<f64>, g: &Array2<f64>, lr: f64, t: i32) {
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        Zip::from(w)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(g)
            .for_each(|w, m, v, &g| {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            });
    }
}

impl GcnModel {
    /// Glorot-uniform weights drawn from `config.seed`.
    pub fn new(in_dim: usize, classes: usize, config: GcnConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let w1 = glorot(in_dim, config.hidden, &mut rng);
        let w2 = glorot(config.hidden, classes, &mut rng);
        GcnModel { w1, w2, config }
    }

    pub fn classes(&self) -> usize {
        self.w2.ncols()
    }

    fn check_dims(&self, adj: &NormAdj, x: ArrayView2<f64>) -> Result<()> {
        if x.nrows() != adj.n() {
            return Err(Error::Dimension(format!(
                "feature rows {} != adjacency size {}",
                x.nrows(),
                adj.n()
            )));
        }
        if x.ncols() != self.w1.nrows() {
            return Err(Error::Dimension(format!(
                "feature width {} != model input width {}",
                x.ncols(),
                self.w1.nrows()
            )));
        }
        Ok(())
    }

    /// Evaluation-mode logits (no dropout).
    pub fn forward(&self, adj: &NormAdj, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dims(adj, x)?;
        Ok(self.forward_ax(adj, &adj.matmul(x)))
    }

    fn forward_ax(&self, adj: &NormAdj, ax: &Array2<f64>) -> Array2<f64> {
        let h = relu(&ax.dot(&self.w1));
        adj.matmul(h.view()).dot(&self.w2)
    }

    /// Loss and gradients. `mask` already carries the inverted-dropout scale.
    fn objective(&self, adj: &NormAdj, ax: &Array2<f64>, train: &[(NodeId, usize)], mask: Option<&Array2<f64>>) -> Grads {
        let wd = self.config.weight_decay;
        let z1 = ax.dot(&self.w1);
        let mut hd = relu(&z1);
        if let Some(m) = mask {
            hd *= m;
        }
        let ahd = adj.matmul(hd.view());
        let logits = ahd.dot(&self.w2);

        let m = train.len() as f64;
        let mut dlogits = Array2::zeros(logits.raw_dim());
        let mut loss = 0.0;
        for &(v, y) in train {
            let ls = log_softmax_row(logits.row(v));
            loss -= ls[y];
            let mut d = dlogits.row_mut(v);
            for (c, l) in ls.iter().enumerate() {
                d[c] += (l.exp() - if c == y { 1.0 } else { 0.0 }) / m;
            }
        }
        loss /= m;
        loss += 0.5 * wd * (self.w1.iter().map(|x| x * x).sum::<f64>() + self.w2.iter().map(|x| x * x).sum::<f64>());

        let gw2 = ahd.t().dot(&dlogits) + &(&self.w2 * wd);
        // Â is symmetric, so Âᵀ products reuse it.
        let mut dh = adj.matmul(dlogits.dot(&self.w2.t()).view());
        if let Some(m) = mask {
            dh *= m;
        }
        Zip::from(&mut dh).and(&z1).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0;
            }
        });
        let gw1 = ax.t().dot(&dh) + &(&self.w1 * wd);
        Grads { loss, w1: gw1, w2: gw2 }
    }

    /// Full-batch training; returns one record per epoch.
    ///
    /// Train accuracy is measured against the training labels given here
    /// (pseudo-labels), test accuracy against `test`.
    pub fn train(
        &mut self,
        adj: &NormAdj,
        x: ArrayView2<f64>,
        train: &[(NodeId, usize)],
        test: &[(NodeId, usize)],
    ) -> Result<Vec<EpochRecord>> {
        self.check_dims(adj, x)?;
        if train.is_empty() {
            return Err(Error::Empty("training set".into()));
        }
        let ax = adj.matmul(x);
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(1);
        let p = self.config.dropout;
        let mut adam1 = Adam::new(self.w1.dim());
        let mut adam2 = Adam::new(self.w2.dim());
        let mut history = Vec::with_capacity(self.config.epochs);

        for epoch in 1..=self.config.epochs {
            let mask = (p > 0.0).then(|| {
                let keep = 1.0 / (1.0 - p);
                Array2::from_shape_simple_fn((adj.n(), self.config.hidden), || {
                    if rng.random::<f64>() < p {
                        0.0
                    } else {
                        keep
                    }
                })
            });
            let g = self.objective(adj, &ax, train, mask.as_ref());
            if !g.loss.is_finite() {
                return Err(Error::Diverged(epoch));
            }
            adam1.step(&mut self.w1, &g.w1, self.config.lr, epoch as i32);
            adam2.step(&mut self.w2, &g.w2, self.config.lr, epoch as i32);
            if !(self.w1.iter().all(|x| x.is_finite()) && self.w2.iter().all(|x| x.is_finite())) {
                return Err(Error::Diverged(epoch));
            }
            let logits = self.forward_ax(adj, &ax);
            history.push(EpochRecord {
                epoch,
                train_acc: evaluate(&logits, train),
                test_acc: (!test.is_empty()).then(|| evaluate(&logits, test)),
                loss: g.loss,
            });
        }
        Ok(history)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let rows = |m: &Array2<f64>| m.rows().into_iter().map(|r| r.to_vec()).collect();
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            config: self.config,
            w1: rows(&self.w1),
            w2: rows(&self.w2),
        }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        if c.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Validation(format!("unsupported checkpoint schema {}", c.schema_version)));
        }
        let mat = |rows: &[Vec<f64>]| -> Result<Array2<f64>> {
            let cols = rows.first().map_or(0, Vec::len);
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            Array2::from_shape_vec((rows.len(), cols), flat).map_err(|e| Error::Dimension(e.to_string()))
        };
        Ok(GcnModel {
            w1: mat(&c.w1)?,
            w2: mat(&c.w2)?,
            config: c.config,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub config: GcnConfig,
    pub w1: Vec<Vec<f64>>,
    pub w2: Vec<Vec<f64>>,
}

fn layer_mut(m: &mut GcnModel, layer: usize) -> &mut Array2<f64> {
    if layer == 0 {
        &mut m.w1
    } else {
        &mut m.w2
    }
}

/// Maximum relative error between analytic and central-difference gradients
/// over every weight. Relative error is `|a - f| / max(|a| + |f|, 1e-6)`.
pub fn gradient_check(
    model: &GcnModel,
    adj: &NormAdj,
    x: ArrayView2<f64>,
    labels: &[(NodeId, usize)],
    eps: f64,
) -> Result<f64> {
    if model.config.dropout > 0.0 {
        return Err(Error::DropoutEnabled);
    }
    model.check_dims(adj, x)?;
    let ax = adj.matmul(x);
    let analytic = model.objective(adj, &ax, labels, None);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for layer in 0..2 {
        let shape = if layer == 0 { model.w1.dim() } else { model.w2.dim() };
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                let orig = layer_mut(&mut probe, layer)[[i, j]];
                layer_mut(&mut probe, layer)[[i, j]] = orig + eps;
                let up = probe.objective(adj, &ax, labels, None).loss;
                layer_mut(&mut probe, layer)[[i, j]] = orig - eps;
                let down = probe.objective(adj, &ax, labels, None).loss;
                layer_mut(&mut probe, layer)[[i, j]] = orig;
                let fd = (up - down) / (2.0 * eps);
                let a = if layer == 0 { analytic.w1[[i, j]] } else { analytic.w2[[i, j]] };
                worst = worst.max((a - fd).abs() / (a.abs() + fd.abs()).max(1e-6));
            }
        }
    }
    Ok(worst)
}

/// Disjoint train / validation / test node sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<NodeId>,
    pub val: Vec<NodeId>,
    pub test: Vec<NodeId>,
}

impl Split {
    /// Test is every ground-truth-labeled node outside `train`, minus a
    /// seeded validation sample of `min(val_size, remaining / 2)` nodes.
    pub fn build(train: &[NodeId], ground_truth: &[Option<usize>], val_size: usize, seed: u64) -> Result<Split> {
        let in_train: std::collections::HashSet<NodeId> = train.iter().copied().collect();
        let mut rest: Vec<NodeId> = (0..ground_truth.len())
            .filter(|v| ground_truth[*v].is_some() && !in_train.contains(v))
            .collect();
        let n_val = val_size.min(rest.len() / 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Partial Fisher-Yates for the validation sample.
        for i in 0..n_val {
            let j = rng.random_range(i..rest.len());
            rest.swap(i, j);
        }
        let mut val = rest[..n_val].to_vec();
        let mut test = rest[n_val..].to_vec();
        val.sort_unstable();
        test.sort_unstable();
        if test.is_empty() {
            return Err(Error::Empty("test split".into()));
        }
        Ok(Split {
            train: train.to_vec(),
            val,
            test,
        })
    }
}
