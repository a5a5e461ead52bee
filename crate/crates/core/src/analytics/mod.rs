//! Statistics over an indexed snapshot: reuse, anomalies, co-appearance,
//! spread connectivity, embeddings and per-character timelines.
//!
//! Everything here is a pure function of an [`IndexedDataset`](crate::model::IndexedDataset).

mod cooccur;
mod embedding;
mod timeline;
mod usage;

use thiserror::Error;

use crate::model::{CharacterKey, SpreadId};

pub use cooccur::{
    co_appearance, graph_density, partition_modularity, spread_graph, CoAppearanceMatrix,
    SpreadEdge, SpreadGraph,
};
pub use embedding::{
    block_embedding, embed_matrix, Embedding, EMBEDDING_MAX_ITERATIONS, EMBEDDING_TOLERANCE,
};
pub use timeline::{character_timeline, line_rhythm, LineRhythm, Timeline, TimelineRow};
pub use usage::{
    bbox_anomalies, reuse_counts, robust_scores, same_spread_duplicates, zipf_fit, Anomaly,
    Duplicate, ZipfFit, DEFAULT_ANOMALY_K,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("graph needs at least 2 nodes, has {0}")]
    TooFewNodes(usize),
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("{0} has no group")]
    UnassignedSpread(SpreadId),
    #[error("need at least {needed} blocks, got {got}")]
    TooFewBlocks { needed: usize, got: usize },
    #[error("axis {axis} did not converge after {iterations} iterations")]
    NoConvergence { axis: usize, iterations: usize },
    #[error("unknown character {0}")]
    UnknownCharacter(CharacterKey),
    #[error("unknown {0}")]
    UnknownSpread(SpreadId),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
}
