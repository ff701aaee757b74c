//! Synthetic homophilous citation graphs in raw-file form.
//!
//! Each class owns a block of vocabulary words. A node switches on words of
//! its own block with probability `p_in` and any other word with `p_out`,
//! giving a binary bag-of-words row and a short text. Every node cites a few
//! earlier-or-later papers, preferring its own class with probability
//! `homophily` and popular targets in proportion to a heavy-tailed weight.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{assemble, AssemblyReport, CiteRecord, CitesFile, ContentRecord, EdgeSemantics};
use crate::error::{Error, Result};
use crate::graph::DirectedTag;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub nodes: usize,
    /// Sorted class names; their count is the number of classes.
    pub class_names: Vec<String>,
    pub words_per_class: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub homophily: f64,
    pub avg_out_degree: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(nodes: usize, classes: usize, seed: u64) -> Self {
        SynthConfig {
            nodes,
            class_names: (0..classes).map(|c| format!("class_{c}")).collect(),
            words_per_class: 12,
            p_in: 0.25,
            p_out: 0.08,
            homophily: 0.8,
            avg_out_degree: 2.5,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthGraph {
    pub content: Vec<ContentRecord>,
    pub cites: CitesFile,
    pub texts: BTreeMap<String, String>,
}

impl SynthGraph {
    pub fn assemble(&self) -> Result<(DirectedTag, AssemblyReport)> {
        assemble(&self.content, &self.cites, EdgeSemantics::CitingToCited, Some(&self.texts))
    }

    pub fn content_file(&self) -> String {
        let mut out = String::new();
        for r in &self.content {
            out.push_str(&r.key);
            for x in &r.features {
                out.push('\t');
                out.push_str(&format!("{x}"));
            }
            out.push('\t');
            out.push_str(&r.label);
            out.push('\n');
        }
        out
    }

    pub fn cites_file(&self) -> String {
        self.cites
            .records
            .iter()
            .map(|r| format!("{}\t{}\n", r.cited, r.citing))
            .collect()
    }

    pub fn texts_file(&self) -> String {
        self.content
            .iter()
            .map(|r| format!("{}\t{}\n", r.key, self.texts[&r.key]))
            .collect()
    }
}

fn word(class: &str, j: usize) -> String {
    format!("{}-{j}", class.to_lowercase().replace('_', "-"))
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthGraph> {
    let classes = cfg.class_names.len();
    if classes < 2 || cfg.nodes < classes {
        return Err(Error::Validation(format!(
            "need at least 2 classes and one node per class, got {} nodes / {classes} classes",
            cfg.nodes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w = cfg.words_per_class;
    let dim = w * classes;

    // Round-robin guarantees every class is present; order is then shuffled.
    let mut labels: Vec<usize> = (0..cfg.nodes).map(|i| i % classes).collect();
    for i in (1..labels.len()).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    let keys: Vec<String> = (0..cfg.nodes).map(|i| format!("p{i}")).collect();

    let mut content = Vec::with_capacity(cfg.nodes);
    let mut texts = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        let mut features = vec![0.0; dim];
        let mut words = Vec::new();
        for (j, f) in features.iter_mut().enumerate() {
            let p = if j / w == c { cfg.p_in } else { cfg.p_out };
            if rng.random::<f64>() < p {
                *f = 1.0;
                words.push(word(&cfg.class_names[j / w], j % w));
            }
        }
        if words.is_empty() {
            features[c * w] = 1.0;
            words.push(word(&cfg.class_names[c], 0));
        }
        texts.insert(keys[i].clone(), format!("On {}.", words.join(", ")));
        content.push(ContentRecord {
            key: keys[i].clone(),
            features,
            label: cfg.class_names[c].clone(),
        });
    }

    let popularity: Vec<f64> = (0..cfg.nodes)
        .map(|_| (1.0 - rng.random::<f64>()).powf(-0.7))
        .collect();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let pickers: Vec<WeightedIndex<f64>> = by_class
        .iter()
        .map(|m| WeightedIndex::new(m.iter().map(|&i| popularity[i])).expect("non-empty class"))
        .collect();

    let mut records = Vec::new();
    let max_deg = (2.0 * cfg.avg_out_degree).round().max(1.0) as usize;
    for citing in 0..cfg.nodes {
        let deg = rng.random_range(1..=max_deg);
        for _ in 0..deg {
            let c = labels[citing];
            let target_class = if rng.random::<f64>() < cfg.homophily {
                c
            } else {
                let k = rng.random_range(0..classes - 1);
                if k >= c {
                    k + 1
                } else {
                    k
                }
            };
            let cited = by_class[target_class][pickers[target_class].sample(&mut rng)];
            records.push(CiteRecord {
                cited: keys[cited].clone(),
                citing: keys[citing].clone(),
            });
        }
    }

    Ok(SynthGraph {
        content,
        cites: CitesFile {
            records,
            blank_lines: 0,
        },
        texts,
    })
}

/// Fraction of edges joining same-label endpoints.
pub fn edge_homophily(graph: &DirectedTag) -> f64 {
    let (mut same, mut total) = (0usize, 0usize);
    for (u, v) in graph.edges() {
        if let (Some(a), Some(b)) = (graph.label(u), graph.label(v)) {
            total += 1;
            same += usize::from(a == b);
        }
    }
    if total == 0 {
        0.0
    } else {
        same as f64 / total as f64
    }
}
