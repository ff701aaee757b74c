//! Label-free node classification on directed citation graphs.
//!
//! Nodes are annotated by several LLM "workers", each prompted with a
//! different slice of the node's directed neighborhood. The answers are fused
//! into pseudo-labels, a two-stage filter picks a small reliable training
//! set, and a GCN is trained on it.

pub mod aggregate;
pub mod annotator;
pub mod dataset;
pub mod error;
pub mod filter;
pub mod gcn;
pub mod graph;
pub mod pipeline;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
pub use graph::{DirectedTag, HomophilyTie, NodeId, Role};
