//! Core algorithms and metrics for multi-video grounded question answering
//! over precomputed embeddings and transcripts.
//!
//! The crate covers the full loop at desk scale, with no model dependencies:
//!
//! - [`model`]: shared domain types and interval-set arithmetic
//! - [`embed`]: the text-embedding interface and the default deterministic
//!   hashed bag-of-words embedder
//! - [`retrieval`]: fused audio-visual / caption cosine scoring, ranking,
//!   and recall@k
//! - [`sfs`]: salient frame selection (affinity matrix + exact DP)
//! - [`agents`]: per-video mock agents and the deterministic meta-aggregator
//! - [`stem`]: the step-wise error metric (Hungarian step matching)
//! - [`mtgs`]: the matched temporal grounding score
//! - [`text_metrics`]: BLEU@4, CIDEr, and embedding text similarity
//! - [`dataio`]: file formats, validation, and canonical report output
//!
//! Everything is deterministic: equal inputs give byte-equal reports across
//! runs, platforms, and worker counts.

pub mod agents;
pub mod assignment;
pub mod dataio;
pub mod embed;
pub mod error;
pub mod mtgs;
pub mod retrieval;
pub mod sfs;
pub mod stem;
pub mod text_metrics;

pub mod model;

pub use error::{Error, Result};
pub use model::{EmbeddingVector, Grounding, IntervalSet, QAItem, Step, TimeInterval};
