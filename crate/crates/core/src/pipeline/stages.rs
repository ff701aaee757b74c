use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use log::{info, warn};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::artifacts::{fingerprint, read_json, write_csv, write_json, DirLock, Manifest};
use super::config::PipelineConfig;
use crate::aggregate::{aggregate, pseudo_label_accuracy, worker_accuracy, PseudoLabel, WorkerAccuracy};
use crate::annotator::{
    build_prompt, synthetic_oracle, Annotator, BudgetState, ChatClient, HttpChatClient, PromptSpec, ResponseCache,
    WorkerAnnotation,
};
use crate::dataset::{apply_embeddings, assemble, parse_cites, parse_content, parse_embeddings_str, parse_texts, AssemblyReport};
use crate::error::{Error, Result};
use crate::filter::{default_k, run_filter, FilterOutcome, FilterParams, PageRankConfig, Stage};
use crate::gcn::{feature_matrix, EpochRecord, GcnModel, NormAdj, Split};
use crate::graph::{DirectedTag, NodeId, NUM_CONFIGS};
use crate::theory::{eigen_check, verify_theorem, HomophilyParams, TheoremRow};

pub const GRAPH_FILE: &str = "graph.json";
pub const INGEST_REPORT_FILE: &str = "ingest_report.json";
pub const ANNOTATIONS_FILE: &str = "annotations.json";
pub const BUDGET_FILE: &str = "budget.json";
pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const PSEUDO_LABELS_CSV: &str = "pseudo_labels.csv";
pub const WORKER_ACCURACY_CSV: &str = "worker_accuracy.csv";
pub const FILTER_FILE: &str = "filter.json";
pub const SCORES_CSV: &str = "scores.csv";
pub const SPLIT_FILE: &str = "split.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";
pub const THEOREM_CSV: &str = "theorem.csv";
pub const SWEEP_CSV: &str = "sweep.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageName {
    Ingest,
    Annotate,
    Aggregate,
    Filter,
    Train,
    Sweep,
}

impl StageName {
    pub fn as_str(self) -> &'static str {
        match self {
            StageName::Ingest => "ingest",
            StageName::Annotate => "annotate",
            StageName::Aggregate => "aggregate",
            StageName::Filter => "filter",
            StageName::Train => "train",
            StageName::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    /// Inputs and outputs unchanged since the last run.
    Skipped,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationsDoc {
    pub mode: String,
    pub model: String,
    pub nodes: Vec<NodeId>,
    /// `workers[i]` belongs to `nodes[i]`, one entry per configuration.
    pub workers: Vec<Vec<WorkerAnnotation>>,
    pub requests: usize,
    pub cache_hits: usize,
    pub spent_usd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateDoc {
    pub class_names: Vec<String>,
    pub pseudo_labels: Vec<PseudoLabel>,
    pub worker_accuracy: Option<Vec<WorkerAccuracy>>,
    pub pseudo_label_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterDoc {
    pub gamma: f64,
    pub lambda: f64,
    pub theta: f64,
    pub eta: f64,
    pub k: usize,
    pub stage1: Vec<NodeId>,
    pub stage2: Vec<NodeId>,
    pub stage2_keys: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> MeanStd {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineReport {
    pub csa: MeanStd,
    pub random: MeanStd,
    pub csa_per_seed: Vec<f64>,
    pub random_per_seed: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub classes: usize,
    pub nodes: usize,
    pub annotated: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub seeds: Vec<u64>,
    pub test_acc: MeanStd,
    pub test_acc_per_seed: Vec<f64>,
    pub val_acc_per_seed: Vec<f64>,
    pub pseudo_label_accuracy: Option<f64>,
    /// Pseudo-label accuracy restricted to the training set.
    pub train_label_accuracy: Option<f64>,
    pub random_baseline: Option<BaselineReport>,
    pub spent_usd: f64,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub history: Vec<EpochRecord>,
    pub test_acc: f64,
    pub val_acc: Option<f64>,
    pub model: GcnModel,
}

/// Inputs shared by every training run on one graph.
pub struct TrainingData {
    pub adj: NormAdj,
    pub x: Array2<f64>,
    pub truth: Vec<Option<usize>>,
}

impl TrainingData {
    pub fn new(graph: &DirectedTag) -> Self {
        TrainingData {
            adj: NormAdj::from_graph(graph),
            x: feature_matrix(graph),
            truth: graph.labels().to_vec(),
        }
    }

    fn truth_pairs(&self, nodes: &[NodeId]) -> Vec<(NodeId, usize)> {
        nodes.iter().filter_map(|&v| self.truth[v].map(|y| (v, y))).collect()
    }
}

fn pseudo_map(pseudo: &[PseudoLabel]) -> HashMap<NodeId, usize> {
    pseudo.iter().filter_map(|p| p.label.map(|l| (p.node, l))).collect()
}

fn train_pairs(nodes: &[NodeId], labels: &HashMap<NodeId, usize>) -> Vec<(NodeId, usize)> {
    nodes.iter().filter_map(|v| labels.get(v).map(|&l| (*v, l))).collect()
}

/// Trains one model per seed on `selected` and scores it on the split.
pub fn train_seeds(
    data: &TrainingData,
    pseudo: &[PseudoLabel],
    selected: &[NodeId],
    cfg: &PipelineConfig,
) -> Result<(Split, Vec<SeedRun>)> {
    let split = Split::build(selected, &data.truth, cfg.gcn.val_size, cfg.seed)?;
    let train = train_pairs(selected, &pseudo_map(pseudo));
    let test = data.truth_pairs(&split.test);
    let val = data.truth_pairs(&split.val);
    let mut runs = Vec::new();
    for s in 0..cfg.gcn.seeds as u64 {
        let seed = cfg.seed + s;
        let mut model = GcnModel::new(data.x.ncols(), class_count(data, pseudo), cfg.gcn.model_config(seed));
        let history = model.train(&data.adj, data.x.view(), &train, &test)?;
        let logits = model.forward(&data.adj, data.x.view())?;
        runs.push(SeedRun {
            seed,
            test_acc: crate::gcn::evaluate(&logits, &test),
            val_acc: (!val.is_empty()).then(|| crate::gcn::evaluate(&logits, &val)),
            history,
            model,
        });
    }
    Ok((split, runs))
}

fn class_count(data: &TrainingData, pseudo: &[PseudoLabel]) -> usize {
    let from_truth = data.truth.iter().flatten().max().map_or(0, |m| m + 1);
    let from_pseudo = pseudo.iter().filter_map(|p| p.label).max().map_or(0, |m| m + 1);
    from_truth.max(from_pseudo)
}

/// Paired comparison against uniform-random selections of the same size
/// from the annotated pool. Seed `s` draws its own random set and both
/// models are scored on the labeled nodes outside either training set.
pub fn compare_with_random(
    data: &TrainingData,
    pseudo: &[PseudoLabel],
    selected: &[NodeId],
    cfg: &PipelineConfig,
    classes: usize,
) -> Result<BaselineReport> {
    let labels = pseudo_map(pseudo);
    let mut pool: Vec<NodeId> = labels.keys().copied().collect();
    pool.sort_unstable();
    let csa_train = train_pairs(selected, &labels);
    let mut csa = Vec::new();
    let mut random = Vec::new();
    for s in 0..cfg.gcn.seeds as u64 {
        let seed = cfg.seed + s;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        let mut shuffled = pool.clone();
        for i in 0..selected.len().min(shuffled.len()) {
            let j = rng.random_range(i..shuffled.len());
            shuffled.swap(i, j);
        }
        let chosen = &shuffled[..selected.len().min(shuffled.len())];
        let rand_train = train_pairs(chosen, &labels);
        let used: HashSet<NodeId> = selected.iter().chain(chosen).copied().collect();
        let eval: Vec<(NodeId, usize)> = (0..data.truth.len())
            .filter(|v| !used.contains(v))
            .filter_map(|v| data.truth[v].map(|y| (v, y)))
            .collect();
        if eval.is_empty() {
            return Err(Error::Empty("no labeled nodes left to compare selections on".into()));
        }
        for (train, out) in [(&csa_train, &mut csa), (&rand_train, &mut random)] {
            let mut model = GcnModel::new(data.x.ncols(), classes, cfg.gcn.model_config(seed));
            model.train(&data.adj, data.x.view(), train, &[])?;
            let logits = model.forward(&data.adj, data.x.view())?;
            out.push(crate::gcn::evaluate(&logits, &eval));
        }
    }
    Ok(BaselineReport {
        csa: mean_std(&csa),
        random: mean_std(&random),
        csa_per_seed: csa,
        random_per_seed: random,
    })
}

/// Filter parameters, resolving the default stage-1 size against the pool.
pub fn filter_params(cfg: &PipelineConfig, graph: &DirectedTag, pool: usize, gamma: f64, lambda: f64) -> FilterParams {
    let f = &cfg.filter;
    let k = match f.k {
        Some(k) => k,
        None => {
            let budget = f.budget.unwrap_or(20 * graph.num_classes());
            let k = default_k(budget, f.eta);
            if k > pool {
                warn!("default K = {k} exceeds the {pool} annotated nodes; using {pool}");
            }
            k.min(pool)
        }
    };
    FilterParams {
        gamma,
        lambda,
        eta: f.eta,
        k,
        kmeans_seed: f.kmeans_seed,
        pagerank: PageRankConfig {
            damping: f.damping,
            ..Default::default()
        },
        ..Default::default()
    }
}

/// Every (node, configuration) prompt for `nodes`.
pub fn node_prompts(graph: &DirectedTag, nodes: &[NodeId], cfg: &PipelineConfig) -> Result<Vec<PromptSpec>> {
    let mut out = Vec::with_capacity(nodes.len() * NUM_CONFIGS);
    for &v in nodes {
        for k in 0..NUM_CONFIGS {
            let tie = graph.homophily_tie(v, k)?;
            out.push(build_prompt(
                &tie,
                graph.texts(),
                graph.class_names(),
                &cfg.annotator.truncation,
                &cfg.annotator.model,
            ));
        }
    }
    Ok(out)
}

/// Nodes to annotate: all, or a seeded sample of `max_nodes`.
pub fn annotation_nodes(graph: &DirectedTag, cfg: &PipelineConfig) -> Vec<NodeId> {
    let n = graph.num_nodes();
    match cfg.annotator.max_nodes {
        Some(m) if m < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(3);
            let mut all: Vec<NodeId> = (0..n).collect();
            for i in 0..m {
                let j = rng.random_range(i..n);
                all.swap(i, j);
            }
            let mut chosen = all[..m].to_vec();
            chosen.sort_unstable();
            chosen
        }
        _ => (0..n).collect(),
    }
}

/// Oracle answers for every configuration of every node.
pub fn oracle_annotations(graph: &DirectedTag, nodes: &[NodeId], noise: f64, seed: u64) -> Result<Vec<Vec<WorkerAnnotation>>> {
    nodes
        .iter()
        .map(|&v| {
            (0..NUM_CONFIGS)
                .map(|k| Ok(synthetic_oracle(&graph.homophily_tie(v, k)?, graph, noise, seed)))
                .collect()
        })
        .collect()
}

/// Aggregates per-node workers.
pub fn aggregate_all(graph: &DirectedTag, nodes: &[NodeId], workers: &[Vec<WorkerAnnotation>]) -> AggregateDoc {
    let class_names = graph.class_names().to_vec();
    let pseudo_labels: Vec<PseudoLabel> = nodes
        .iter()
        .zip(workers)
        .map(|(&v, w)| aggregate(v, w, &class_names))
        .collect();
    let truth: Vec<Option<usize>> = nodes.iter().map(|&v| graph.label(v)).collect();
    AggregateDoc {
        worker_accuracy: worker_accuracy(workers, &truth, &class_names).ok(),
        pseudo_label_accuracy: pseudo_label_accuracy(&pseudo_labels, graph.labels()),
        pseudo_labels,
        class_names,
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn opt_fmt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// Runs pipeline stages against one configuration.
pub struct Pipeline<'c> {
    cfg: PipelineConfig,
    hash: String,
    client: Option<&'c dyn ChatClient>,
}

impl<'c> Pipeline<'c> {
    /// Validates the configuration before any work happens.
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let hash = cfg.hash();
        Ok(Pipeline { cfg, hash, client: None })
    }

    /// Uses `client` instead of an HTTP client built from the config.
    pub fn with_client(mut self, client: &'c dyn ChatClient) -> Self {
        self.client = Some(client);
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.out_dir
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    pub fn lock(&self) -> Result<DirLock> {
        DirLock::acquire(&self.cfg.out_dir)
    }

    fn require(&self, name: &str, producer: StageName) -> Result<PathBuf> {
        let p = self.path(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact {
                path: p,
                stage: producer.as_str().into(),
            })
        }
    }

    fn guarded(
        &self,
        stage: StageName,
        slice: &impl Serialize,
        inputs: &[PathBuf],
        body: impl FnOnce() -> Result<Vec<String>>,
    ) -> Result<Outcome> {
        let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
        let fp = fingerprint(stage.as_str(), slice, &refs)?;
        let dir = &self.cfg.out_dir;
        let mut manifest = Manifest::load(dir)?;
        if manifest.is_current(dir, stage.as_str(), &fp) {
            info!("{}: inputs unchanged, skipping", stage.as_str());
            return Ok(Outcome::Skipped);
        }
        let outputs = body()?;
        // Re-load in case the body touched the manifest (it does not today).
        manifest = Manifest::load(dir).unwrap_or(manifest);
        manifest.record(dir, stage.as_str(), &fp, &outputs)?;
        manifest.save(dir)?;
        Ok(Outcome::Ran)
    }

    /// Runs one stage while holding the output-directory lock.
    pub fn run_stage(&self, stage: StageName) -> Result<Outcome> {
        let _lock = self.lock()?;
        self.stage_unlocked(stage)
    }

    fn stage_unlocked(&self, stage: StageName) -> Result<Outcome> {
        match stage {
            StageName::Ingest => self.ingest(),
            StageName::Annotate => self.annotate(),
            StageName::Aggregate => self.aggregate(),
            StageName::Filter => self.filter(),
            StageName::Train => self.train(),
            StageName::Sweep => self.sweep(),
        }
    }

    /// ingest, annotate, aggregate, filter, train.
    pub fn run_all(&self) -> Result<Vec<(StageName, Outcome)>> {
        let _lock = self.lock()?;
        let mut done = Vec::new();
        for s in [
            StageName::Ingest,
            StageName::Annotate,
            StageName::Aggregate,
            StageName::Filter,
            StageName::Train,
        ] {
            done.push((s, self.stage_unlocked(s)?));
        }
        Ok(done)
    }

    fn dataset_path(&self, p: &Option<PathBuf>, what: &str) -> Result<Option<PathBuf>> {
        match p {
            Some(p) if !p.exists() => Err(Error::Validation(format!("dataset.{what} {} does not exist", p.display()))),
            other => Ok(other.clone()),
        }
    }

    fn ingest(&self) -> Result<Outcome> {
        let d = &self.cfg.dataset;
        let content = self
            .dataset_path(&d.content, "content")?
            .ok_or_else(|| Error::Validation("dataset.content is not set".into()))?;
        let cites = self
            .dataset_path(&d.cites, "cites")?
            .ok_or_else(|| Error::Validation("dataset.cites is not set".into()))?;
        let texts = self.dataset_path(&d.texts, "texts")?;
        let embeddings = self.dataset_path(&d.embeddings, "embeddings")?;
        let mut inputs = vec![content.clone(), cites.clone()];
        inputs.extend(texts.iter().cloned());
        inputs.extend(embeddings.iter().cloned());

        self.guarded(StageName::Ingest, &d.edge_semantics, &inputs, || {
            let records = parse_content(&content)?;
            let cite_file = parse_cites(&cites)?;
            let text_map = texts.as_ref().map(parse_texts).transpose()?;
            let (mut graph, report) = assemble(&records, &cite_file, d.edge_semantics, text_map.as_ref())?;
            if let Some(e) = &embeddings {
                let text = std::fs::read_to_string(e).map_err(|err| Error::io(e, err))?;
                apply_embeddings(&mut graph, parse_embeddings_str(&text, &e.display().to_string())?)?;
            }
            info!(
                "ingest: {} nodes, {} edges, {} classes, {} unknown-key cites",
                graph.num_nodes(),
                graph.num_edges(),
                graph.num_classes(),
                report.unknown_keys
            );
            self.write_graph(&graph)?;
            write_json(&self.path(INGEST_REPORT_FILE), &self.hash, &report)?;
            Ok(vec![GRAPH_FILE.into(), INGEST_REPORT_FILE.into()])
        })
    }

    fn write_graph(&self, graph: &DirectedTag) -> Result<()> {
        let mut doc: serde_json::Value = serde_json::from_str(&crate::dataset::graph_to_json(graph)?)?;
        doc["config_hash"] = self.hash.clone().into();
        let path = self.path(GRAPH_FILE);
        std::fs::write(&path, serde_json::to_string(&doc)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load_graph(&self) -> Result<DirectedTag> {
        crate::dataset::load_graph(self.require(GRAPH_FILE, StageName::Ingest)?)
    }

    pub fn ingest_report(&self) -> Result<AssemblyReport> {
        read_json(&self.path(INGEST_REPORT_FILE), StageName::Ingest.as_str())
    }

    fn annotate(&self) -> Result<Outcome> {
        let graph_path = self.require(GRAPH_FILE, StageName::Ingest)?;
        let a = &self.cfg.annotator;
        let slice = (
            &a.model,
            a.oracle_noise,
            a.oracle_noise.map(|_| self.cfg.seed),
            a.max_nodes,
            a.max_nodes.map(|_| self.cfg.seed),
            &a.truncation,
            a.temperature,
            a.max_output_tokens,
        );
        self.guarded(StageName::Annotate, &slice, &[graph_path], || {
            let graph = self.load_graph()?;
            let nodes = annotation_nodes(&graph, &self.cfg);
            let doc = match a.oracle_noise {
                Some(noise) => AnnotationsDoc {
                    mode: "oracle".into(),
                    model: format!("oracle(noise={noise})"),
                    workers: oracle_annotations(&graph, &nodes, noise, self.cfg.seed)?,
                    nodes,
                    requests: 0,
                    cache_hits: 0,
                    spent_usd: 0.0,
                },
                None => self.annotate_llm(&graph, nodes)?,
            };
            write_json(&self.path(ANNOTATIONS_FILE), &self.hash, &doc)?;
            Ok(vec![ANNOTATIONS_FILE.into()])
        })
    }

    fn budget_state(&self) -> Result<BudgetState> {
        let a = &self.cfg.annotator;
        let mut b = BudgetState::new(a.budget_usd, a.price_per_1k_in, a.price_per_1k_out);
        let path = self.path(BUDGET_FILE);
        if path.exists() {
            let prev: BudgetState = read_json(&path, StageName::Annotate.as_str())?;
            b.spent_usd = prev.spent_usd;
        }
        Ok(b)
    }

    fn annotate_llm(&self, graph: &DirectedTag, nodes: Vec<NodeId>) -> Result<AnnotationsDoc> {
        let a = &self.cfg.annotator;
        let prompts = node_prompts(graph, &nodes, &self.cfg)?;
        let cache = ResponseCache::open(self.cfg.cache_path())?;
        let owned;
        let client: &dyn ChatClient = match self.client {
            Some(c) => c,
            None => {
                let key = std::env::var(&a.api_key_env).ok().filter(|k| !k.is_empty());
                if key.is_none() {
                    warn!("{} is not set; sending requests without an API key", a.api_key_env);
                }
                owned = HttpChatClient::new(a.endpoint.clone(), key, Duration::from_secs(a.timeout_secs));
                &owned
            }
        };
        let annotator = Annotator::new(Some(client), cache, self.budget_state()?, a.settings());
        let results = annotator.annotate_all(&prompts, a.max_inflight);
        let budget = annotator.budget();
        write_json(&self.path(BUDGET_FILE), &self.hash, &budget)?;
        info!(
            "annotate: {} requests, spent ${:.4} of ${:.2}",
            annotator.request_count(),
            budget.spent_usd,
            budget.limit_usd
        );

        let mut first_err: Option<Error> = None;
        let mut flat = Vec::with_capacity(results.len());
        for r in results {
            match r {
                Ok(w) => flat.push(w),
                Err(e) => {
                    let rank = |e: &Error| match e {
                        Error::BudgetExhausted { .. } => 0,
                        Error::Transport { .. } => 1,
                        _ => 2,
                    };
                    if first_err.as_ref().is_none_or(|f| rank(&e) < rank(f)) {
                        first_err = Some(e);
                    }
                }
            }
        }
        if let Some(e) = first_err {
            return Err(e);
        }
        let cache_hits = flat.iter().filter(|w| w.from_cache).count();
        let workers: Vec<Vec<WorkerAnnotation>> = flat.chunks(NUM_CONFIGS).map(<[_]>::to_vec).collect();
        Ok(AnnotationsDoc {
            mode: "llm".into(),
            model: a.model.clone(),
            nodes,
            workers,
            requests: annotator.request_count(),
            cache_hits,
            spent_usd: budget.spent_usd,
        })
    }

    pub fn annotations(&self) -> Result<AnnotationsDoc> {
        read_json(&self.require(ANNOTATIONS_FILE, StageName::Annotate)?, "annotate")
    }

    fn aggregate(&self) -> Result<Outcome> {
        let inputs = [
            self.require(GRAPH_FILE, StageName::Ingest)?,
            self.require(ANNOTATIONS_FILE, StageName::Annotate)?,
        ];
        self.guarded(StageName::Aggregate, &(), &inputs, || {
            let graph = self.load_graph()?;
            let ann = self.annotations()?;
            let doc = aggregate_all(&graph, &ann.nodes, &ann.workers);
            if let Some(acc) = doc.pseudo_label_accuracy {
                info!("aggregate: pseudo-label accuracy {acc:.4}");
            }
            write_json(&self.path(AGGREGATE_FILE), &self.hash, &doc)?;
            self.write_pseudo_csv(&graph, &doc)?;
            let mut outputs = vec![AGGREGATE_FILE.to_string(), PSEUDO_LABELS_CSV.to_string()];
            if let Some(acc) = &doc.worker_accuracy {
                let rows = acc
                    .iter()
                    .map(|w| vec![w.config_k.to_string(), fmt(w.accuracy), w.n.to_string(), w.all_unparseable.to_string()])
                    .collect::<Vec<_>>();
                write_csv(
                    &self.path(WORKER_ACCURACY_CSV),
                    &self.hash,
                    &["config_k", "accuracy", "n", "all_unparseable"],
                    &rows,
                )?;
                outputs.push(WORKER_ACCURACY_CSV.into());
            }
            Ok(outputs)
        })
    }

    fn write_pseudo_csv(&self, graph: &DirectedTag, doc: &AggregateDoc) -> Result<()> {
        let name = |c: Option<usize>| c.map(|c| doc.class_names[c].clone()).unwrap_or_default();
        let mut header = vec!["node_key", "label", "confidence", "unparseable_count", "truth"];
        let worker_cols: Vec<String> = (0..NUM_CONFIGS).map(|k| format!("w{k}")).collect();
        header.extend(worker_cols.iter().map(String::as_str));
        let rows: Vec<Vec<String>> = doc
            .pseudo_labels
            .iter()
            .map(|p| {
                let mut r = vec![
                    graph.key(p.node).to_string(),
                    name(p.label),
                    fmt(p.confidence),
                    p.unparseable_count.to_string(),
                    name(graph.label(p.node)),
                ];
                for k in 0..NUM_CONFIGS {
                    r.push(
                        p.per_worker_top1
                            .get(k)
                            .copied()
                            .flatten()
                            .map(|(c, conf)| format!("{}:{conf}", doc.class_names[c]))
                            .unwrap_or_default(),
                    );
                }
                r
            })
            .collect();
        write_csv(&self.path(PSEUDO_LABELS_CSV), &self.hash, &header, &rows)
    }

    pub fn aggregated(&self) -> Result<AggregateDoc> {
        read_json(&self.require(AGGREGATE_FILE, StageName::Aggregate)?, "aggregate")
    }

    fn filter(&self) -> Result<Outcome> {
        let inputs = [
            self.require(GRAPH_FILE, StageName::Ingest)?,
            self.require(AGGREGATE_FILE, StageName::Aggregate)?,
        ];
        self.guarded(StageName::Filter, &self.cfg.filter, &inputs, || {
            let graph = self.load_graph()?;
            let agg = self.aggregated()?;
            let pool = agg.pseudo_labels.iter().filter(|p| p.label.is_some()).count();
            let params = filter_params(&self.cfg, &graph, pool, self.cfg.filter.gamma, self.cfg.filter.lambda);
            let out = run_filter(&graph, &agg.pseudo_labels, &params)?;
            info!("filter: stage 1 kept {}, stage 2 kept {}", out.stage1.len(), out.stage2.len());
            let doc = FilterDoc {
                gamma: params.gamma,
                lambda: params.lambda,
                theta: 1.0 - params.gamma - params.lambda,
                eta: params.eta,
                k: params.k,
                stage2_keys: out.stage2.iter().map(|&v| graph.key(v).to_string()).collect(),
                stage1: out.stage1.clone(),
                stage2: out.stage2.clone(),
            };
            write_json(&self.path(FILTER_FILE), &self.hash, &doc)?;
            self.write_scores_csv(&graph, &out)?;
            Ok(vec![FILTER_FILE.into(), SCORES_CSV.into()])
        })
    }

    fn write_scores_csv(&self, graph: &DirectedTag, out: &FilterOutcome) -> Result<()> {
        let rows: Vec<Vec<String>> = out
            .scores
            .iter()
            .map(|s| {
                vec![
                    graph.key(s.node).to_string(),
                    fmt(s.pagerank),
                    fmt(s.density),
                    s.degree.to_string(),
                    fmt(s.s1),
                    opt_fmt(s.coe),
                    fmt(s.confidence),
                    opt_fmt(s.s2),
                    match s.stage {
                        Stage::None => "0",
                        Stage::Stage1 => "1",
                        Stage::Stage2 => "2",
                    }
                    .into(),
                ]
            })
            .collect();
        write_csv(
            &self.path(SCORES_CSV),
            &self.hash,
            &["node_key", "P", "D", "Deg", "s1", "coe", "conf", "s2", "selected_stage"],
            &rows,
        )
    }

    pub fn filtered(&self) -> Result<FilterDoc> {
        read_json(&self.require(FILTER_FILE, StageName::Filter)?, "filter")
    }

    fn train(&self) -> Result<Outcome> {
        let inputs = [
            self.require(GRAPH_FILE, StageName::Ingest)?,
            self.require(AGGREGATE_FILE, StageName::Aggregate)?,
            self.require(FILTER_FILE, StageName::Filter)?,
        ];
        let slice = (&self.cfg.gcn, self.cfg.seed);
        self.guarded(StageName::Train, &slice, &inputs, || {
            let graph = self.load_graph()?;
            let agg = self.aggregated()?;
            let filt = self.filtered()?;
            let spent = self.annotations().map(|a| a.spent_usd).unwrap_or(0.0);
            let data = TrainingData::new(&graph);
            let (split, runs) = train_seeds(&data, &agg.pseudo_labels, &filt.stage2, &self.cfg)?;
            let mut outputs = vec![SPLIT_FILE.to_string()];
            write_json(&self.path(SPLIT_FILE), &self.hash, &split)?;
            for (i, run) in runs.iter().enumerate() {
                let hist = format!("history_seed{i}.csv");
                let rows: Vec<Vec<String>> = run
                    .history
                    .iter()
                    .map(|r| vec![r.epoch.to_string(), fmt(r.train_acc), opt_fmt(r.test_acc), fmt(r.loss)])
                    .collect();
                write_csv(&self.path(&hist), &self.hash, &["epoch", "train_acc", "test_acc", "loss"], &rows)?;
                let ckpt = format!("checkpoint_seed{i}.json");
                write_json(&self.path(&ckpt), &self.hash, &run.model.to_checkpoint())?;
                outputs.push(hist);
                outputs.push(ckpt);
            }

            let labels = pseudo_map(&agg.pseudo_labels);
            let judged: Vec<bool> = filt
                .stage2
                .iter()
                .filter_map(|v| Some(labels.get(v)? == graph.label(*v).as_ref()?))
                .collect();
            let baseline = if self.cfg.gcn.random_baseline {
                Some(compare_with_random(&data, &agg.pseudo_labels, &filt.stage2, &self.cfg, graph.num_classes())?)
            } else {
                None
            };
            let test: Vec<f64> = runs.iter().map(|r| r.test_acc).collect();
            let report = TrainReport {
                classes: graph.num_classes(),
                nodes: graph.num_nodes(),
                annotated: agg.pseudo_labels.len(),
                train_size: split.train.len(),
                val_size: split.val.len(),
                test_size: split.test.len(),
                seeds: runs.iter().map(|r| r.seed).collect(),
                test_acc: mean_std(&test),
                test_acc_per_seed: test,
                val_acc_per_seed: runs.iter().filter_map(|r| r.val_acc).collect(),
                pseudo_label_accuracy: agg.pseudo_label_accuracy,
                train_label_accuracy: (!judged.is_empty())
                    .then(|| judged.iter().filter(|&&b| b).count() as f64 / judged.len() as f64),
                random_baseline: baseline,
                spent_usd: spent,
            };
            info!("train: test accuracy {:.4} ± {:.4}", report.test_acc.mean, report.test_acc.std);
            write_json(&self.path(REPORT_JSON), &self.hash, &report)?;
            let md = render_report(&report, &agg, &filt);
            std::fs::write(self.path(REPORT_MD), md).map_err(|e| Error::io(self.path(REPORT_MD), e))?;
            outputs.push(REPORT_JSON.into());
            outputs.push(REPORT_MD.into());
            Ok(outputs)
        })
    }

    pub fn report(&self) -> Result<TrainReport> {
        read_json(&self.require(REPORT_JSON, StageName::Train)?, "train")
    }

    /// Workers for the annotated nodes, replayed without network access.
    fn replay_annotations(&self, graph: &DirectedTag) -> Result<(Vec<NodeId>, Vec<Vec<WorkerAnnotation>>)> {
        let doc = self.annotations()?;
        if let Some(noise) = self.cfg.annotator.oracle_noise {
            return Ok((doc.nodes.clone(), oracle_annotations(graph, &doc.nodes, noise, self.cfg.seed)?));
        }
        let prompts = node_prompts(graph, &doc.nodes, &self.cfg)?;
        let cache = ResponseCache::open(self.cfg.cache_path())?;
        let a = &self.cfg.annotator;
        let replay = Annotator::new(None, cache, BudgetState::new(0.0, 0.0, 0.0), a.settings());
        let flat = prompts.iter().map(|p| replay.annotate(p)).collect::<Result<Vec<_>>>()?;
        Ok((doc.nodes, flat.chunks(NUM_CONFIGS).map(<[_]>::to_vec).collect()))
    }

    fn sweep(&self) -> Result<Outcome> {
        let inputs = [
            self.require(GRAPH_FILE, StageName::Ingest)?,
            self.require(ANNOTATIONS_FILE, StageName::Annotate)?,
        ];
        let slice = (&self.cfg.sweep, &self.cfg.filter, &self.cfg.gcn, self.cfg.seed);
        self.guarded(StageName::Sweep, &slice, &inputs, || {
            let graph = self.load_graph()?;
            let (nodes, workers) = self.replay_annotations(&graph)?;
            let agg = aggregate_all(&graph, &nodes, &workers);
            let pool = agg.pseudo_labels.iter().filter(|p| p.label.is_some()).count();
            let data = TrainingData::new(&graph);
            let mut rows = Vec::new();
            for (gamma, lambda) in self.cfg.sweep.grid()? {
                let params = filter_params(&self.cfg, &graph, pool, gamma, lambda);
                let out = run_filter(&graph, &agg.pseudo_labels, &params)?;
                let (_, runs) = train_seeds(&data, &agg.pseudo_labels, &out.stage2, &self.cfg)?;
                let acc = mean_std(&runs.iter().map(|r| r.test_acc).collect::<Vec<_>>());
                info!("sweep: gamma {gamma} lambda {lambda} -> {:.4} ± {:.4}", acc.mean, acc.std);
                rows.push(vec![
                    fmt(gamma),
                    fmt(lambda),
                    fmt((1.0 - gamma - lambda).max(0.0)),
                    fmt(params.eta),
                    params.k.to_string(),
                    out.stage2.len().to_string(),
                    fmt(acc.mean),
                    fmt(acc.std),
                    runs.len().to_string(),
                ]);
            }
            write_csv(
                &self.path(SWEEP_CSV),
                &self.hash,
                &["gamma", "lambda", "theta", "eta", "k", "selected", "test_acc_mean", "test_acc_std", "seeds"],
                &rows,
            )?;
            Ok(vec![SWEEP_CSV.into()])
        })
    }

    /// Closed form, eigenvalues and Monte Carlo for the configured theorem
    /// parameters. Returns whether every check passed.
    pub fn verify_theorem(&self) -> Result<(bool, Vec<TheoremRow>)> {
        let _lock = self.lock()?;
        let t = &self.cfg.theorem;
        let params = HomophilyParams::new(t.alpha, t.classes)?;
        let rows = verify_theorem(&params, t.hops, t.samples, t.fanout, self.cfg.seed)?;
        let eig = eigen_check(&params);
        let csv_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.hop.to_string(),
                    fmt(r.diag),
                    fmt(r.off_diag),
                    fmt(r.empirical),
                    fmt(r.std_error),
                    fmt(r.gap),
                    r.dominant.to_string(),
                    r.pass.to_string(),
                ]
            })
            .collect();
        write_csv(
            &self.path(THEOREM_CSV),
            &self.hash,
            &["h", "diag", "off_diag", "empirical", "std_error", "gap", "dominant", "pass"],
            &csv_rows,
        )?;
        Ok((eig.pass && rows.iter().all(|r| r.pass), rows))
    }
}

fn render_report(r: &TrainReport, agg: &AggregateDoc, f: &FilterDoc) -> String {
    let pct = |x: f64| format!("{:.2}", 100.0 * x);
    let mut s = String::from("# Run report\n\n");
    s.push_str(&format!(
        "- nodes: {} ({} classes), annotated: {}\n",
        r.nodes, r.classes, r.annotated
    ));
    if let Some(a) = r.pseudo_label_accuracy {
        s.push_str(&format!("- pseudo-label accuracy (annotated nodes): {}%\n", pct(a)));
    }
    s.push_str(&format!(
        "- filter: gamma {}, lambda {}, theta {:.4}, eta {}, K {} -> {} training nodes\n",
        f.gamma,
        f.lambda,
        f.theta,
        f.eta,
        f.k,
        f.stage2.len()
    ));
    if let Some(a) = r.train_label_accuracy {
        s.push_str(&format!("- pseudo-label accuracy (training nodes): {}%\n", pct(a)));
    }
    s.push_str(&format!(
        "- split: {} train / {} val / {} test\n",
        r.train_size, r.val_size, r.test_size
    ));
    s.push_str(&format!(
        "- GCN test accuracy: {} ± {} over {} seeds\n",
        pct(r.test_acc.mean),
        pct(r.test_acc.std),
        r.seeds.len()
    ));
    if let Some(b) = &r.random_baseline {
        s.push_str(&format!(
            "- paired comparison: filtered {} ± {} vs uniform-random {} ± {}\n",
            pct(b.csa.mean),
            pct(b.csa.std),
            pct(b.random.mean),
            pct(b.random.std)
        ));
    }
    s.push_str(&format!("- LLM spend: ${:.4}\n", r.spent_usd));
    if let Some(acc) = &agg.worker_accuracy {
        s.push_str("\n| config | worker accuracy | n |\n|---|---|---|\n");
        for w in acc {
            s.push_str(&format!("| {} | {} | {} |\n", w.config_k, pct(w.accuracy), w.n));
        }
    }
    s
}

/// Rows of a CSV artifact keyed by its first column.
pub fn csv_by_key(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let (_, rows) = super::artifacts::read_csv(path)?;
    Ok(rows.into_iter().filter_map(|r| Some((r.first()?.clone(), r))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_values() {
        let m = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.std - 1.0).abs() < 1e-12);
        assert_eq!(mean_std(&[5.0]).std, 0.0);
    }

    fn small_graph() -> DirectedTag {
        crate::synth::generate(&crate::synth::SynthConfig::new(60, 3, 4))
            .unwrap()
            .assemble()
            .unwrap()
            .0
    }

    #[test]
    fn node_sample_is_seeded_sorted_and_sized() {
        let g = small_graph();
        let mut cfg = PipelineConfig::default();
        assert_eq!(annotation_nodes(&g, &cfg).len(), 60);
        cfg.annotator.max_nodes = Some(10);
        let a = annotation_nodes(&g, &cfg);
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a, annotation_nodes(&g, &cfg));
        cfg.seed = 1;
        assert_ne!(a, annotation_nodes(&g, &cfg));
    }

    #[test]
    fn default_k_is_capped_at_pool() {
        let g = small_graph();
        let mut cfg = PipelineConfig::default();
        // 20 * 3 classes / 0.15 = 400 > 60.
        assert_eq!(filter_params(&cfg, &g, 60, 0.02, 0.78).k, 60);
        cfg.filter.budget = Some(3);
        assert_eq!(filter_params(&cfg, &g, 60, 0.02, 0.78).k, 20);
        cfg.filter.k = Some(7);
        assert_eq!(filter_params(&cfg, &g, 60, 0.02, 0.78).k, 7);
    }

    #[test]
    fn noiseless_oracle_aggregates_to_tie_plurality() {
        let g = small_graph();
        let nodes: Vec<NodeId> = (0..g.num_nodes()).collect();
        let workers = oracle_annotations(&g, &nodes, 0.0, 0).unwrap();
        assert!(workers.iter().all(|w| w.len() == NUM_CONFIGS));
        let doc = aggregate_all(&g, &nodes, &workers);
        assert_eq!(doc.pseudo_labels.len(), 60);
        let acc = doc.worker_accuracy.unwrap();
        assert_eq!(acc.len(), NUM_CONFIGS);
        // Config 0 is the center alone, so a noiseless worker is always right.
        assert_eq!(acc[0].accuracy, 1.0);
        assert_eq!(doc.pseudo_label_accuracy, Some(1.0));
    }

    #[test]
    fn random_comparison_is_reproducible() {
        let g = small_graph();
        let nodes: Vec<NodeId> = (0..g.num_nodes()).collect();
        let doc = aggregate_all(&g, &nodes, &oracle_annotations(&g, &nodes, 0.3, 0).unwrap());
        let mut cfg = PipelineConfig::default();
        cfg.gcn.seeds = 2;
        cfg.gcn.epochs = 20;
        let data = TrainingData::new(&g);
        let selected = [0, 1, 2, 3, 4, 5];
        let a = compare_with_random(&data, &doc.pseudo_labels, &selected, &cfg, 3).unwrap();
        let b = compare_with_random(&data, &doc.pseudo_labels, &selected, &cfg, 3).unwrap();
        assert_eq!(a.csa_per_seed, b.csa_per_seed);
        assert_eq!(a.random_per_seed, b.random_per_seed);
        assert_eq!(a.random_per_seed.len(), 2);
    }
}
