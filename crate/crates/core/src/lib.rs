//! Multi-level hypergraph embedding.
//!
//! A hypergraph is coarsened into a hierarchy by assigning every node to one of
//! its hyperedges and merging the nodes that picked the same hyperedge. The
//! star expansion of the coarsest level is embedded with a random-walk
//! skip-gram model (or an external tool), and the embedding is then pushed back
//! down the hierarchy: projected onto each finer level and smoothed by damped
//! neighbour averaging on that level's star graph.
//!
//! The [`eval`] module holds the two downstream tasks used to judge an
//! embedding: node classification with multinomial logistic regression, and
//! hyperedge prediction from per-dimension variance features.

pub mod coarsen;
pub mod embed;
pub mod error;
pub mod eval;
pub mod graph;
pub mod hypergraph;
pub mod io;
pub mod matrix;
pub mod pipeline;
pub mod refine;
pub mod rng;
pub mod star;
pub mod synth;

pub use coarsen::{
    coarsen_hierarchy, coarsen_level, AssignKind, AssignPolicy, CoarseLevel, Hierarchy, MergeMap,
};
pub use embed::{embed_graph, external_embed, generate_walks, train_skipgram, WalkConfig};
pub use error::{Error, Result};
pub use graph::CsrGraph;
pub use hypergraph::{build_hypergraph, Cleaned, Hypergraph, IdMap, RawHypergraph};
pub use matrix::{EmbeddingMatrix, Matrix};
pub use pipeline::{run_pipeline, InitEmbedder, LevelStats, PipelineConfig, PipelineReport};
pub use refine::{project, refine, RefineConfig};
pub use star::{build_star_expansion, Origin, StarGraph, VertexKind};
