use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node id {0}")]
    UnknownNode(usize),

    #[error("homophily tie config {0} out of range 0..=7")]
    ConfigOutOfRange(usize),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{0}: file contains no records")]
    EmptyFile(String),

    #[error("embeddings missing for {} node(s): {}", .0.len(), .0.join(", "))]
    MissingEmbeddings(Vec<String>),

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("pagerank did not converge after {iterations} iterations (last L1 delta {delta:e})")]
    NoConvergence { iterations: usize, delta: f64 },

    #[error("need at least {k} points for k-means, got {n}")]
    TooFewPoints { n: usize, k: usize },

    #[error("cannot select {k} nodes from {available}")]
    SelectionTooLarge { k: usize, available: usize },

    #[error("training diverged at epoch {0} (loss is not finite)")]
    Diverged(usize),

    #[error("budget exhausted: spent ${spent:.4} of ${limit:.4}, next request would cost ~${projected:.4}")]
    BudgetExhausted {
        spent: f64,
        limit: f64,
        projected: f64,
    },

    #[error("LLM transport failure after {attempts} attempt(s): {msg}")]
    Transport { attempts: usize, msg: String },

    #[error("no JSON answer array in response")]
    UnparseableResponse,

    #[error("cache miss for prompt {0} while network access is disabled")]
    CacheMiss(String),

    #[error("missing artifact {path}; run `{stage}` first")]
    MissingArtifact { path: PathBuf, stage: String },

    #[error("output directory is locked by another run ({0})")]
    Locked(PathBuf),

    #[error("gradient check requires dropout to be disabled")]
    DropoutEnabled,

    #[error("{0}")]
    Empty(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingArtifact { .. } => 2,
            Error::BudgetExhausted { .. } | Error::CacheMiss(_) => 3,
            Error::Transport { .. } => 4,
            _ => 1,
        }
    }
}
