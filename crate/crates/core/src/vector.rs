//! Exact cosine-similarity index over embeddings of enriched names.
//!
//! A flat index: search is an exhaustive dot-product scan, which is exact
//! by construction and comfortably fast at target-schema scale (tens of
//! tables, a few documents per column). Vectors are unit-normalized at
//! ingestion and queries are expected unit-normalized too, so cosine
//! similarity is a plain dot product.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enrich::EnrichedName;
use crate::provider::EmbeddingVector;
use crate::schema::ColumnRef;

#[derive(Debug, Error)]
pub enum VectorError {
    #[error("cannot build a vector index over an empty corpus")]
    EmptyCorpus,
    #[error("dimension mismatch: index dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("doc {doc_id} is not unit-normalized (norm {norm})")]
    NotNormalized { doc_id: usize, norm: f64 },
    #[error("doc_ids must be dense and unique: expected {expected}, got {got}")]
    NonDenseDocIds { expected: usize, got: usize },
}

/// One indexed embedding: an enriched name attached to a target column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorDoc {
    pub doc_id: usize,
    pub target: ColumnRef,
    pub name: EnrichedName,
    pub vector: EmbeddingVector,
}

/// A thresholded similarity hit.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorHit {
    pub target: ColumnRef,
    pub similarity: f64,
    pub matched_doc: usize,
}

/// Immutable flat index. Doc ids are dense `0..n`; all vectors share one
/// dimension and unit norm.
#[derive(Debug, Clone)]
pub struct VectorIndex {
    dimension: usize,
    docs: Vec<VectorDoc>,
}

pub fn build_vector_index(docs: Vec<VectorDoc>) -> Result<VectorIndex, VectorError> {
    let Some(first) = docs.first() else {
        return Err(VectorError::EmptyCorpus);
    };
    let dimension = first.vector.dimension();
    for (position, doc) in docs.iter().enumerate() {
        if doc.doc_id != position {
            return Err(VectorError::NonDenseDocIds {
                expected: position,
                got: doc.doc_id,
            });
        }
        if doc.vector.dimension() != dimension {
            return Err(VectorError::DimensionMismatch {
                expected: dimension,
                got: doc.vector.dimension(),
            });
        }
        if !doc.vector.is_unit(1e-6) {
            return Err(VectorError::NotNormalized {
                doc_id: doc.doc_id,
                norm: doc.vector.norm(),
            });
        }
    }
    Ok(VectorIndex { dimension, docs })
}

impl VectorIndex {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn docs(&self) -> &[VectorDoc] {
        &self.docs
    }
}

/// Exhaustive cosine search: hits sorted by similarity descending (ties by
/// ascending doc_id), at most `top_k`, every similarity `>= threshold`.
pub fn vector_search(
    index: &VectorIndex,
    query: &EmbeddingVector,
    top_k: usize,
    threshold: f64,
) -> Result<Vec<VectorHit>, VectorError> {
    if query.dimension() != index.dimension {
        return Err(VectorError::DimensionMismatch {
            expected: index.dimension,
            got: query.dimension(),
        });
    }
    if top_k == 0 {
        return Ok(Vec::new());
    }
    let mut hits: Vec<VectorHit> = index
        .docs
        .iter()
        .map(|doc| VectorHit {
            target: doc.target.clone(),
            similarity: query.dot(&doc.vector),
            matched_doc: doc.doc_id,
        })
        .filter(|hit| hit.similarity >= threshold)
        .collect();
    hits.sort_by(|a, b| {
        b.similarity
            .partial_cmp(&a.similarity)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.matched_doc.cmp(&b.matched_doc))
    });
    hits.truncate(top_k);
    Ok(hits)
}
