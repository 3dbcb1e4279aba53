//! Retrofitting of pretrained entity embeddings to typed, directed knowledge
//! graphs.
//!
//! Every relation gets its own penalty function (identity, translation,
//! linear or neural) and the embeddings, relation parameters and anchors to
//! the original distributional vectors are optimized jointly. The crate also
//! carries the evaluation protocols used to judge the result: leave-one-
//! relation-out link prediction, word similarity and vector-offset analogies.
//!
//! Modules, roughly bottom-up:
//!
//! - [`graph`], [`negatives`], [`stats`]: the knowledge graph, negative edge
//!   sampling and structure summaries.
//! - [`embed`]: embedding I/O, alignment to a graph and the PPMI transform.
//! - [`penalty`]: relation penalty functions and their gradients.
//! - [`engine`]: the block-coordinate and SGD optimizers.
//! - [`eval`]: link prediction, lexical metrics and a synthetic graph generator.
//! - [`cli`]: the `kgretro` command-line front end.

pub mod cli;
pub mod embed;
pub mod engine;
pub mod error;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod negatives;
pub mod penalty;
pub mod stats;

pub use embed::{align, load_embeddings, pmi_l2_normalize, save_embeddings, EmbeddingFormat, EmbeddingSet};
pub use engine::{retrofit, retrofit_closed_form, retrofit_sgd, RetrofitConfig, RetrofitResult};
pub use error::{Error, Result};
pub use graph::{load_edgelist, KnowledgeGraph, Triple};
pub use negatives::{sample_negative_edges, NegativeEdgeSet, NegativeStrategy};
pub use penalty::{RelationKind, RelationParams};
pub use stats::graph_stats;
