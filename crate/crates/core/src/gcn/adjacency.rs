use ndarray::{Array2, ArrayView2};

use crate::graph::DirectedTag;

/// Graphs with at least this many nodes use the sparse representation.
pub const DENSE_LIMIT: usize = 5000;

/// Row-compressed square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn matmul(&self, m: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, m.ncols()));
        for i in 0..self.n {
            let mut row = out.row_mut(i);
            for p in self.indptr[i]..self.indptr[i + 1] {
                row.scaled_add(self.values[p], &m.row(self.indices[p]));
            }
        }
        out
    }
}

/// `D^-1/2 (A_sym + I) D^-1/2`, symmetric.
#[derive(Debug, Clone, PartialEq)]
pub enum NormAdj {
    Dense(Array2<f64>),
    Sparse(Csr),
}

impl NormAdj {
    pub fn from_graph(graph: &DirectedTag) -> Self {
        let edges: Vec<(usize, usize)> = graph.edges().collect();
        Self::from_edges(graph.num_nodes(), &edges, graph.num_nodes() >= DENSE_LIMIT)
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)], sparse: bool) -> Self {
        let mut nbrs: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for &(u, v) in edges {
            if u != v {
                nbrs[u].push(v);
                nbrs[v].push(u);
            }
        }
        for row in &mut nbrs {
            row.sort_unstable();
            row.dedup();
        }
        let inv_sqrt: Vec<f64> = nbrs.iter().map(|r| 1.0 / (r.len() as f64).sqrt()).collect();
        if sparse {
            let mut indptr = vec![0];
            let mut indices = Vec::new();
            let mut values = Vec::new();
            for (i, row) in nbrs.iter().enumerate() {
                for &j in row {
                    indices.push(j);
                    values.push(inv_sqrt[i] * inv_sqrt[j]);
                }
                indptr.push(indices.len());
            }
            NormAdj::Sparse(Csr {
                n,
                indptr,
                indices,
                values,
            })
        } else {
            let mut a = Array2::zeros((n, n));
            for (i, row) in nbrs.iter().enumerate() {
                for &j in row {
                    a[[i, j]] = inv_sqrt[i] * inv_sqrt[j];
                }
            }
            NormAdj::Dense(a)
        }
    }

    pub fn n(&self) -> usize {
        match self {
            NormAdj::Dense(a) => a.nrows(),
            NormAdj::Sparse(c) => c.n,
        }
    }

    pub fn matmul(&self, m: ArrayView2<f64>) -> Array2<f64> {
        match self {
            NormAdj::Dense(a) => a.dot(&m),
            NormAdj::Sparse(c) => c.matmul(m),
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            NormAdj::Dense(a) => a.clone(),
            NormAdj::Sparse(c) => c.matmul(Array2::eye(c.n).view()),
        }
    }
}
