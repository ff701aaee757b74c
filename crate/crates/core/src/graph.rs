//! Directed text-attributed graph and the neighborhood operators used to
//! build homophily ties.
//!
//! Nodes carry dense ids `0..n` in ingestion order. Adjacency is kept twice,
//! as sorted successor and predecessor lists, so every 1-hop and 2-hop
//! query is a pair of slice walks. The graph is immutable once built.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Number of homophily-tie configurations per node.
pub const NUM_CONFIGS: usize = 8;

/// Composite two-hop neighborhoods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Composite {
    /// `pred(succ(v))`: co-citers of what `v` cites.
    PredOfSucc,
    /// `succ(pred(v))`: papers co-cited with `v`.
    SuccOfPred,
    /// `pred(pred(v))`
    PredOfPred,
    /// `succ(succ(v))`
    SuccOfSucc,
}

/// How a tie member relates to the tie's center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[serde(rename = "self")]
    Center,
    Pred,
    Succ,
    PredOfPred,
    PredOfSucc,
    SuccOfPred,
    SuccOfSucc,
}

impl Role {
    pub fn hops(self) -> usize {
        match self {
            Role::Center => 0,
            Role::Pred | Role::Succ => 1,
            _ => 2,
        }
    }

    fn of(c: Composite) -> Role {
        match c {
            Composite::PredOfSucc => Role::PredOfSucc,
            Composite::SuccOfPred => Role::SuccOfPred,
            Composite::PredOfPred => Role::PredOfPred,
            Composite::SuccOfSucc => Role::SuccOfSucc,
        }
    }
}

/// One of the eight subgraph configurations around a center node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomophilyTie {
    pub center: NodeId,
    pub config_k: usize,
    /// Center first, then the remaining members by ascending id.
    pub members: Vec<NodeId>,
    /// Parallel to `members`.
    pub roles: Vec<Role>,
}

impl HomophilyTie {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members (excluding the center) carrying `role`, in id order.
    pub fn with_role(&self, role: Role) -> impl Iterator<Item = NodeId> + '_ {
        self.members
            .iter()
            .zip(&self.roles)
            .filter(move |(_, r)| **r == role)
            .map(|(m, _)| *m)
    }
}

/// Edge bookkeeping produced while building a graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeStats {
    pub offered: usize,
    pub self_loops: usize,
    pub duplicates: usize,
    pub added: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedTag {
    keys: Vec<String>,
    succ: Vec<Vec<NodeId>>,
    pred: Vec<Vec<NodeId>>,
    texts: Vec<String>,
    features: Vec<Vec<f64>>,
    labels: Vec<Option<usize>>,
    class_names: Vec<String>,
}

/// Node-wise attributes; edges are added separately.
#[derive(Debug, Clone, Default)]
pub struct NodeTable {
    pub keys: Vec<String>,
    pub texts: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Option<usize>>,
    pub class_names: Vec<String>,
}

impl DirectedTag {
    /// Builds a graph, dropping self-loops and duplicate edges.
    pub fn build(
        nodes: NodeTable,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<(Self, EdgeStats)> {
        let n = nodes.keys.len();
        if nodes.texts.len() != n || nodes.features.len() != n || nodes.labels.len() != n {
            return Err(Error::Dimension(format!(
                "node table columns disagree: {} keys, {} texts, {} feature rows, {} labels",
                n,
                nodes.texts.len(),
                nodes.features.len(),
                nodes.labels.len()
            )));
        }
        if let Some(d) = nodes.features.first().map(Vec::len) {
            if let Some((i, row)) = nodes.features.iter().enumerate().find(|(_, r)| r.len() != d) {
                return Err(Error::Dimension(format!(
                    "node {} has {} features, expected {d}",
                    nodes.keys[i],
                    row.len()
                )));
            }
        }
        let num_classes = nodes.class_names.len();
        if let Some(bad) = nodes.labels.iter().flatten().find(|&&l| l >= num_classes) {
            return Err(Error::Dimension(format!(
                "label index {bad} outside {num_classes} classes"
            )));
        }

        let mut stats = EdgeStats::default();
        let mut succ = vec![Vec::new(); n];
        for (u, v) in edges {
            stats.offered += 1;
            if u >= n {
                return Err(Error::UnknownNode(u));
            }
            if v >= n {
                return Err(Error::UnknownNode(v));
            }
            if u == v {
                stats.self_loops += 1;
                continue;
            }
            succ[u].push(v);
        }
        let mut pred = vec![Vec::new(); n];
        for (u, list) in succ.iter_mut().enumerate() {
            let before = list.len();
            list.sort_unstable();
            list.dedup();
            stats.duplicates += before - list.len();
            for &v in list.iter() {
                pred[v].push(u);
            }
        }
        // pred lists are filled in ascending u, so already sorted.
        stats.added = succ.iter().map(Vec::len).sum();

        Ok((
            DirectedTag {
                keys: nodes.keys,
                succ,
                pred,
                texts: nodes.texts,
                features: nodes.features,
                labels: nodes.labels,
                class_names: nodes.class_names,
            },
            stats,
        ))
    }

    pub fn num_nodes(&self) -> usize {
        self.keys.len()
    }

    pub fn num_edges(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn key(&self, v: NodeId) -> &str {
        &self.keys[v]
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn text(&self, v: NodeId) -> &str {
        &self.texts[v]
    }

    pub fn texts(&self) -> &[String] {
        &self.texts
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, v: NodeId) -> Option<usize> {
        self.labels[v]
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn index_of(&self, key: &str) -> Option<NodeId> {
        self.keys.iter().position(|k| k == key)
    }

    /// Key → id map for bulk lookups.
    pub fn key_index(&self) -> BTreeMap<&str, NodeId> {
        self.keys.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect()
    }

    pub(crate) fn set_features(&mut self, features: Vec<Vec<f64>>) {
        self.features = features;
    }

    pub(crate) fn set_texts(&mut self, texts: Vec<String>) {
        self.texts = texts;
    }

    /// All edges `(u, v)` ordered by `u`, then `v`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
    }

    fn check(&self, v: NodeId) -> Result<()> {
        if v < self.num_nodes() {
            Ok(())
        } else {
            Err(Error::UnknownNode(v))
        }
    }

    /// Nodes `u` with an edge `u → v`, ascending.
    pub fn pred(&self, v: NodeId) -> Result<&[NodeId]> {
        self.check(v)?;
        Ok(&self.pred[v])
    }

    /// Nodes `u` with an edge `v → u`, ascending.
    pub fn succ(&self, v: NodeId) -> Result<&[NodeId]> {
        self.check(v)?;
        Ok(&self.succ[v])
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.pred[v].len()
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.succ[v].len()
    }

    /// Two-hop neighborhood; may contain `v` itself.
    pub fn composite_neighbors(&self, v: NodeId, which: Composite) -> Result<Vec<NodeId>> {
        self.check(v)?;
        let (first, second) = match which {
            Composite::PredOfSucc => (&self.succ, &self.pred),
            Composite::SuccOfPred => (&self.pred, &self.succ),
            Composite::PredOfPred => (&self.pred, &self.pred),
            Composite::SuccOfSucc => (&self.succ, &self.succ),
        };
        let mut out: Vec<NodeId> = first[v]
            .iter()
            .flat_map(|&mid| second[mid].iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Subgraph configuration `k` around `v`.
    ///
    /// | k | members                         |
    /// |---|---------------------------------|
    /// | 0 | v                               |
    /// | 1 | v, pred                         |
    /// | 2 | v, succ                         |
    /// | 3 | v, pred, succ                   |
    /// | 4 | v, pred, pred(pred)             |
    /// | 5 | v, succ, pred(succ)             |
    /// | 6 | v, pred, succ(pred)             |
    /// | 7 | v, succ, succ(succ)             |
    ///
    /// A node reachable through several relations keeps the one with fewer
    /// hops (`pred` before `succ` on a tie).
    pub fn homophily_tie(&self, v: NodeId, k: usize) -> Result<HomophilyTie> {
        if k >= NUM_CONFIGS {
            return Err(Error::ConfigOutOfRange(k));
        }
        self.check(v)?;
        let (one_hop, two_hop): (&[Role], Option<Composite>) = match k {
            0 => (&[], None),
            1 => (&[Role::Pred], None),
            2 => (&[Role::Succ], None),
            3 => (&[Role::Pred, Role::Succ], None),
            4 => (&[Role::Pred], Some(Composite::PredOfPred)),
            5 => (&[Role::Succ], Some(Composite::PredOfSucc)),
            6 => (&[Role::Pred], Some(Composite::SuccOfPred)),
            _ => (&[Role::Succ], Some(Composite::SuccOfSucc)),
        };

        let mut assigned: BTreeMap<NodeId, Role> = BTreeMap::new();
        assigned.insert(v, Role::Center);
        for &role in one_hop {
            let list = if role == Role::Pred { &self.pred[v] } else { &self.succ[v] };
            for &u in list {
                assigned.entry(u).or_insert(role);
            }
        }
        if let Some(c) = two_hop {
            for u in self.composite_neighbors(v, c)? {
                assigned.entry(u).or_insert(Role::of(c));
            }
        }

        let mut members = Vec::with_capacity(assigned.len());
        let mut roles = Vec::with_capacity(assigned.len());
        members.push(v);
        roles.push(Role::Center);
        for (u, r) in assigned {
            if u != v {
                members.push(u);
                roles.push(r);
            }
        }
        Ok(HomophilyTie {
            center: v,
            config_k: k,
            members,
            roles,
        })
    }
}
