//! Schema matching engine combining LLM metadata enrichment with hybrid
//! lexical and vector retrieval.
//!
//! The crate is organized around the two phases of a matching run:
//!
//! - **Indexing**: enrich the target schema's columns with generated
//!   alternate names ([`enrich`]), normalize them ([`normalize`]), and build
//!   a BM25 full-text index ([`lexical`]) plus an exact cosine-similarity
//!   index ([`vector`]) over the results.
//! - **Querying**: enrich each source column the same way, retrieve
//!   candidates from both indexes, narrow them by LLM table selection, and
//!   produce a final LLM ranking ([`pipeline`]).
//!
//! [`provider`] defines the pluggable text-generation and embedding
//! backends (HTTP clients, an on-disk cache, and deterministic offline
//! mocks), [`schema`] the schema and ground-truth model, [`eval`] the
//! HitRate@K / Recall@K harness, and [`artifact`] the persisted file
//! formats that tie a run together.

pub mod artifact;
pub mod enrich;
pub mod eval;
pub mod lexical;
pub mod normalize;
pub mod pipeline;
pub mod provider;
pub mod schema;
pub mod vector;

pub use normalize::{TokenizedName, normalize_name};
pub use schema::{ColumnMeta, ColumnRef, GroundTruth, SchemaDef, TableMeta};
