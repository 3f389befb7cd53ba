//! Example selection: embed training questions once, then rank them by
//! cosine similarity against each incoming question with an exhaustive
//! scan. Ties keep corpus order.

mod embed;
mod index;

pub use embed::{
    cosine, embed, fnv1a64, EmbedError, Embedder, HashedTrigramEmbedder, RemoteEmbedder, RemoteEmbedderConfig, Vector,
    DEFAULT_TRIGRAM_DIM, UNIT_TOLERANCE,
};
pub use index::{build_index, EmbeddingIndex, IndexEntry, IndexError, Neighbor, INDEX_MAGIC, INDEX_VERSION};

/// Number of neighbours retrieved per question unless configured otherwise.
pub const DEFAULT_TOP_N: usize = 5;
