//! Semantic retrieval of column documentation with exclusion tracking.

mod embedder;
mod exclusion;
mod index;
mod remote;
mod retrieve;

pub use embedder::{Embedder, HashEmbedder};
pub use exclusion::ExclusionSet;
pub use index::{build_index, ColumnIndex, INDEX_FORMAT_VERSION};
pub use remote::{RemoteEmbedder, RemoteEmbedderConfig};
pub use retrieve::{assemble_snippet, expand_doc, initial_schema, retrieve, ScoredDoc};
