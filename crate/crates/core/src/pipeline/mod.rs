//! Staged, resumable pipeline: ingest → annotate → aggregate → filter →
//! train, plus the theorem check and hyperparameter sweep.
//!
//! Each stage reads the previous stage's artifacts from the output directory
//! and records a fingerprint of its inputs in `manifest.json`; a stage whose
//! fingerprint and outputs are unchanged is skipped.

pub mod artifacts;
pub mod config;
pub mod stages;

pub use artifacts::{read_csv, DirLock, Manifest, SCHEMA_VERSION};
pub use config::PipelineConfig;
pub use stages::{compare_with_random, mean_std, Outcome, Pipeline, StageName, TrainReport};
