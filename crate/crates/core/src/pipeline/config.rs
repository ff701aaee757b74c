use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotator::{AnnotatorSettings, TruncationPolicy};
use crate::dataset::EdgeSemantics;
use crate::error::{Error, Result};
use crate::filter::Stage1Weights;
use crate::gcn::{GcnConfig, DEFAULT_VAL_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub annotator: AnnotatorConfig,
    pub filter: FilterConfig,
    pub gcn: GcnSection,
    pub sweep: SweepConfig,
    pub theorem: TheoremConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            out_dir: PathBuf::from("out"),
            seed: 0,
            dataset: DatasetConfig::default(),
            annotator: AnnotatorConfig::default(),
            filter: FilterConfig::default(),
            gcn: GcnSection::default(),
            sweep: SweepConfig::default(),
            theorem: TheoremConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub content: Option<PathBuf>,
    pub cites: Option<PathBuf>,
    pub texts: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub edge_semantics: EdgeSemantics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotatorConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    /// Relative paths resolve against the output directory.
    pub cache: PathBuf,
    pub budget_usd: f64,
    pub price_per_1k_in: f64,
    pub price_per_1k_out: f64,
    pub max_inflight: usize,
    pub rate_limit: Option<f64>,
    pub timeout_secs: u64,
    pub retries: usize,
    pub backoff_ms: u64,
    pub temperature: f64,
    pub max_output_tokens: u64,
    /// Setting this replaces the LLM with the synthetic oracle.
    pub oracle_noise: Option<f64>,
    /// Annotate a seeded sample of this many nodes instead of all.
    pub max_nodes: Option<usize>,
    pub truncation: TruncationPolicy,
}

impl Default for AnnotatorConfig {
    fn default() -> Self {
        let s = AnnotatorSettings::default();
        AnnotatorConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: s.model,
            api_key_env: "OPENAI_API_KEY".into(),
            cache: PathBuf::from("cache.jsonl"),
            budget_usd: 2.5,
            price_per_1k_in: 0.0005,
            price_per_1k_out: 0.0015,
            max_inflight: 4,
            rate_limit: None,
            timeout_secs: 60,
            retries: s.retries,
            backoff_ms: 1000,
            temperature: s.temperature,
            max_output_tokens: s.max_output_tokens,
            oracle_noise: None,
            max_nodes: None,
            truncation: TruncationPolicy::default(),
        }
    }
}

impl AnnotatorConfig {
    pub fn settings(&self) -> AnnotatorSettings {
        AnnotatorSettings {
            model: self.model.clone(),
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
            retries: self.retries,
            backoff_base: std::time::Duration::from_millis(self.backoff_ms),
            rate_limit: self.rate_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub eta: f64,
    /// Stage-1 size; defaults to `ceil(budget / eta)` capped at the pool.
    pub k: Option<usize>,
    /// Final training-set size; defaults to `20 * |Y|`.
    pub budget: Option<usize>,
    pub kmeans_seed: u64,
    pub damping: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            gamma: 0.02,
            lambda: 0.78,
            eta: 0.15,
            k: None,
            budget: None,
            kmeans_seed: 0,
            damping: 0.85,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcnSection {
    pub hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub epochs: usize,
    /// Training runs per report; seeds are `seed, seed + 1, ...`.
    pub seeds: usize,
    pub val_size: usize,
    /// Also train on an equal-size uniform-random selection.
    pub random_baseline: bool,
}

impl Default for GcnSection {
    fn default() -> Self {
        let g = GcnConfig::default();
        GcnSection {
            hidden: g.hidden,
            lr: g.lr,
            weight_decay: g.weight_decay,
            dropout: g.dropout,
            epochs: g.epochs,
            seeds: 5,
            val_size: DEFAULT_VAL_SIZE,
            random_baseline: true,
        }
    }
}

impl GcnSection {
    pub fn model_config(&self, seed: u64) -> GcnConfig {
        GcnConfig {
            hidden: self.hidden,
            lr: self.lr,
            weight_decay: self.weight_decay,
            dropout: self.dropout,
            epochs: self.epochs,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub gammas: Vec<f64>,
    /// Per-cell lambda; when absent, `lambda = lambda_sum - gamma`.
    pub lambdas: Option<Vec<f64>>,
    pub lambda_sum: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            gammas: vec![0.0, 0.01, 0.02, 0.03, 0.04],
            lambdas: None,
            lambda_sum: 0.8,
        }
    }
}

impl SweepConfig {
    pub fn grid(&self) -> Result<Vec<(f64, f64)>> {
        match &self.lambdas {
            Some(l) if l.len() != self.gammas.len() => Err(Error::Validation(format!(
                "sweep has {} gammas but {} lambdas",
                self.gammas.len(),
                l.len()
            ))),
            Some(l) => Ok(self.gammas.iter().copied().zip(l.iter().copied()).collect()),
            None => Ok(self.gammas.iter().map(|&g| (g, self.lambda_sum - g)).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoremConfig {
    pub alpha: f64,
    pub classes: usize,
    pub hops: u32,
    pub samples: usize,
    pub fanout: usize,
}

impl Default for TheoremConfig {
    fn default() -> Self {
        TheoremConfig {
            alpha: 0.7,
            classes: 3,
            hops: 2,
            samples: 100_000,
            fanout: 2,
        }
    }
}

fn invalid(msg: String) -> Error {
    Error::Validation(msg)
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Loads a config file; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        for p in [
            &mut self.dataset.content,
            &mut self.dataset.cites,
            &mut self.dataset.texts,
            &mut self.dataset.embeddings,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        Stage1Weights::new(self.filter.gamma, self.filter.lambda)?;
        if !(self.filter.eta > 0.0 && self.filter.eta <= 1.0) {
            return Err(invalid(format!("filter.eta must be in (0, 1], got {}", self.filter.eta)));
        }
        if !(self.filter.damping > 0.0 && self.filter.damping < 1.0) {
            return Err(invalid(format!("filter.damping must be in (0, 1), got {}", self.filter.damping)));
        }
        if self.filter.k == Some(0) || self.filter.budget == Some(0) {
            return Err(invalid("filter.k and filter.budget must be positive".into()));
        }
        let a = &self.annotator;
        if a.budget_usd.is_nan() || a.budget_usd < 0.0 {
            return Err(invalid(format!("annotator.budget_usd must be >= 0, got {}", a.budget_usd)));
        }
        if a.price_per_1k_in < 0.0 || a.price_per_1k_out < 0.0 {
            return Err(invalid("annotator prices must be >= 0".into()));
        }
        if let Some(n) = a.oracle_noise {
            if !(0.0..=1.0).contains(&n) {
                return Err(invalid(format!("annotator.oracle_noise must be in [0, 1], got {n}")));
            }
        }
        if a.max_inflight == 0 {
            return Err(invalid("annotator.max_inflight must be at least 1".into()));
        }
        let g = &self.gcn;
        if g.hidden == 0 || g.epochs == 0 || g.seeds == 0 {
            return Err(invalid("gcn.hidden, gcn.epochs and gcn.seeds must be positive".into()));
        }
        if !(0.0..1.0).contains(&g.dropout) {
            return Err(invalid(format!("gcn.dropout must be in [0, 1), got {}", g.dropout)));
        }
        if !(g.lr >= 0.0 && g.weight_decay >= 0.0) {
            return Err(invalid("gcn.lr and gcn.weight_decay must be >= 0".into()));
        }
        for (gamma, lambda) in self.sweep.grid()? {
            Stage1Weights::new(gamma, lambda)?;
        }
        let t = &self.theorem;
        crate::theory::HomophilyParams::new(t.alpha, t.classes)?;
        if t.hops == 0 || t.fanout == 0 || t.samples == 0 {
            return Err(invalid("theorem hops, fanout and samples must be positive".into()));
        }
        Ok(())
    }

    /// Digest of everything except the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn cache_path(&self) -> PathBuf {
        if self.annotator.cache.is_relative() {
            self.out_dir.join(&self.annotator.cache)
        } else {
            self.annotator.cache.clone()
        }
    }

    pub fn oracle_mode(&self) -> bool {
        self.annotator.oracle_noise.is_some()
    }
}
