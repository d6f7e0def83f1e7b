//! Persisted artifacts: enrichment results, both index files, run
//! manifests, and metric reports.
//!
//! Every artifact is a versioned JSON document stamped with the config hash
//! of the inputs that produced it. Downstream commands refuse artifacts
//! whose stamp does not match the current configuration, so a stale index
//! can never silently feed a run. Serialization is deterministic (struct
//! field order, sorted containers, trailing newline): identical runs
//! produce byte-identical files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize, de::DeserializeOwned};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::enrich::{EnrichedColumn, EnrichmentConfig};
use crate::lexical::{Bm25Params, LexicalDoc, LexicalIndex, build_lexical_index};
use crate::pipeline::{AblationFlags, ColumnFailure, RankedPrediction};
use crate::schema::ColumnRef;
use crate::vector::{VectorDoc, VectorIndex, build_vector_index};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path} has artifact version {got}, expected {expected}")]
    VersionMismatch {
        path: String,
        got: u32,
        expected: u32,
    },
    #[error(
        "stale artifact {path}: built with config {got} but the current config hashes to {expected} (rerun `index` or pass --rebuild)"
    )]
    StaleConfig {
        path: String,
        got: String,
        expected: String,
    },
    #[error("invalid artifact {path}: {message}")]
    Invalid { path: String, message: String },
    #[error(transparent)]
    Lexical(#[from] crate::lexical::LexicalError),
    #[error(transparent)]
    Vector(#[from] crate::vector::VectorError),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

pub fn file_sha256(path: &Path) -> Result<String, ArtifactError> {
    let bytes = fs::read(path).map_err(|source| ArtifactError::Read {
        path: path.display().to_string(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}

fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| ArtifactError::Write {
            path: path.display().to_string(),
            source,
        })?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("artifact serialization");
    text.push('\n');
    fs::write(path, text).map_err(|source| ArtifactError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, ArtifactError> {
    let text = fs::read_to_string(path).map_err(|source| ArtifactError::Read {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| ArtifactError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn check_version(version: u32, path: &Path) -> Result<(), ArtifactError> {
    if version != ARTIFACT_VERSION {
        return Err(ArtifactError::VersionMismatch {
            path: path.display().to_string(),
            got: version,
            expected: ARTIFACT_VERSION,
        });
    }
    Ok(())
}

fn check_hash(stamp: &str, expected: &str, path: &Path) -> Result<(), ArtifactError> {
    if stamp != expected {
        return Err(ArtifactError::StaleConfig {
            path: path.display().to_string(),
            got: stamp.to_string(),
            expected: expected.to_string(),
        });
    }
    Ok(())
}

/// Enriched columns for one schema side, reusable across index rebuilds
/// without re-calling providers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentArtifact {
    pub version: u32,
    pub config_hash: String,
    pub schema_name: String,
    pub side: String,
    pub enrichment: EnrichmentConfig,
    pub columns: Vec<EnrichedColumn>,
}

impl EnrichmentArtifact {
    pub fn new(
        config_hash: &str,
        schema_name: &str,
        side: &str,
        enrichment: EnrichmentConfig,
        columns: Vec<EnrichedColumn>,
    ) -> Self {
        Self {
            version: ARTIFACT_VERSION,
            config_hash: config_hash.to_string(),
            schema_name: schema_name.to_string(),
            side: side.to_string(),
            enrichment,
            columns,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ArtifactError> {
        save_json(path, self)
    }

    pub fn load(path: &Path, expected_hash: &str) -> Result<Self, ArtifactError> {
        let artifact: Self = load_json(path)?;
        check_version(artifact.version, path)?;
        check_hash(&artifact.config_hash, expected_hash, path)?;
        Ok(artifact)
    }
}

/// Summary statistics stored alongside the documents for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalStats {
    pub doc_count: usize,
    pub avgdl: f64,
    pub vocabulary_size: usize,
}

/// The BM25 index artifact: parameters, summary statistics, and the full
/// document table. Postings are rebuilt on load and verified against the
/// stored statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalIndexArtifact {
    pub version: u32,
    pub config_hash: String,
    pub params: Bm25Params,
    pub stats: LexicalStats,
    pub docs: Vec<LexicalDoc>,
}

impl LexicalIndexArtifact {
    pub fn from_index(index: &LexicalIndex, config_hash: &str) -> Self {
        Self {
            version: ARTIFACT_VERSION,
            config_hash: config_hash.to_string(),
            params: index.params(),
            stats: LexicalStats {
                doc_count: index.len(),
                avgdl: index.avgdl(),
                vocabulary_size: index.vocabulary_size(),
            },
            docs: index.docs().to_vec(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ArtifactError> {
        save_json(path, self)
    }

    pub fn load(path: &Path, expected_hash: &str) -> Result<LexicalIndex, ArtifactError> {
        let artifact: Self = load_json(path)?;
        check_version(artifact.version, path)?;
        check_hash(&artifact.config_hash, expected_hash, path)?;
        let index = build_lexical_index(artifact.docs, artifact.params)?;
        if index.len() != artifact.stats.doc_count
            || index.vocabulary_size() != artifact.stats.vocabulary_size
            || (index.avgdl() - artifact.stats.avgdl).abs() > 1e-12
        {
            return Err(ArtifactError::Invalid {
                path: path.display().to_string(),
                message: "stored statistics disagree with the document table".into(),
            });
        }
        Ok(index)
    }
}

/// The vector index artifact: dimension, provider id, and the raw vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndexArtifact {
    pub version: u32,
    pub config_hash: String,
    pub dimension: usize,
    pub embedder_id: String,
    pub docs: Vec<VectorDoc>,
}

impl VectorIndexArtifact {
    pub fn from_index(index: &VectorIndex, embedder_id: &str, config_hash: &str) -> Self {
        Self {
            version: ARTIFACT_VERSION,
            config_hash: config_hash.to_string(),
            dimension: index.dimension(),
            embedder_id: embedder_id.to_string(),
            docs: index.docs().to_vec(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ArtifactError> {
        save_json(path, self)
    }

    pub fn load(path: &Path, expected_hash: &str) -> Result<VectorIndex, ArtifactError> {
        let artifact: Self = load_json(path)?;
        check_version(artifact.version, path)?;
        check_hash(&artifact.config_hash, expected_hash, path)?;
        let index = build_vector_index(artifact.docs)?;
        if index.dimension() != artifact.dimension {
            return Err(ArtifactError::Invalid {
                path: path.display().to_string(),
                message: format!(
                    "stored dimension {} disagrees with the vectors ({})",
                    artifact.dimension,
                    index.dimension()
                ),
            });
        }
        Ok(index)
    }
}

/// Hashes of the index files a matching run was performed against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexArtifactHashes {
    pub lexical: String,
    pub vector: String,
}

/// The output of a matching run: full provenance plus one prediction per
/// source column. This file is the input to evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub config_hash: String,
    pub source_schema: String,
    pub target_schema: String,
    pub source_schema_hash: String,
    pub target_schema_hash: String,
    pub generator_id: String,
    pub embedder_id: Option<String>,
    /// `Some("needle")` for the retrieval-free baseline.
    pub baseline: Option<String>,
    pub ablation: AblationFlags,
    /// Absent in baseline mode, which needs no indexes.
    pub index_artifacts: Option<IndexArtifactHashes>,
    pub predictions: Vec<RankedPrediction>,
    pub failures: Vec<ColumnFailure>,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<(), ArtifactError> {
        save_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self, ArtifactError> {
        let manifest: Self = load_json(path)?;
        check_version(manifest.version, path)?;
        manifest.validate(path)?;
        Ok(manifest)
    }

    /// Predictions must form a set of queries: no duplicate sources, no
    /// duplicate targets within one ranking.
    fn validate(&self, path: &Path) -> Result<(), ArtifactError> {
        let mut sources: std::collections::HashSet<ColumnRef> = std::collections::HashSet::new();
        for prediction in &self.predictions {
            if !sources.insert(prediction.source.clone()) {
                return Err(ArtifactError::Invalid {
                    path: path.display().to_string(),
                    message: format!("duplicate prediction for {}", prediction.source),
                });
            }
            let mut targets: std::collections::HashSet<&ColumnRef> =
                std::collections::HashSet::new();
            for target in &prediction.ranked_targets {
                if !targets.insert(target) {
                    return Err(ArtifactError::Invalid {
                        path: path.display().to_string(),
                        message: format!(
                            "duplicate target {target} in the prediction for {}",
                            prediction.source
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Write a report or other text output with a trailing newline.
pub fn write_text(path: &Path, content: &str) -> Result<(), ArtifactError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| ArtifactError::Write {
            path: path.display().to_string(),
            source,
        })?;
    }
    let mut text = content.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    fs::write(path, text).map_err(|source| ArtifactError::Write {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enrich::{EnrichedName, NameOrigin};
    use crate::normalize::normalize_name;
    use crate::provider::EmbeddingVector;

    fn name(text: &str) -> EnrichedName {
        EnrichedName {
            text: text.to_string(),
            tokens: normalize_name(text),
            origin: NameOrigin::Original,
            position: 1,
        }
    }

    fn lexical_doc(doc_id: usize, text: &str) -> LexicalDoc {
        LexicalDoc {
            doc_id,
            target: ColumnRef::new("t", format!("c{doc_id}")),
            name: name(text),
        }
    }

    #[test]
    fn lexical_artifact_round_trips_and_checks_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lexical.json");
        let index = build_lexical_index(
            vec![lexical_doc(0, "location id"), lexical_doc(1, "person id")],
            Bm25Params::default(),
        )
        .unwrap();
        LexicalIndexArtifact::from_index(&index, "hash-a")
            .save(&path)
            .unwrap();

        let reloaded = LexicalIndexArtifact::load(&path, "hash-a").unwrap();
        assert_eq!(reloaded.len(), 2);
        assert_eq!(reloaded.document_frequency("id"), 2);

        let err = LexicalIndexArtifact::load(&path, "hash-b").unwrap_err();
        assert!(matches!(err, ArtifactError::StaleConfig { .. }), "{err}");
    }

    #[test]
    fn vector_artifact_preserves_similarities_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vector.json");
        let docs: Vec<VectorDoc> = (0..4)
            .map(|i| VectorDoc {
                doc_id: i,
                target: ColumnRef::new("t", format!("c{i}")),
                name: name("n"),
                vector: EmbeddingVector::new(vec![i as f64 + 0.3, 1.7, -0.2])
                    .normalized()
                    .unwrap(),
            })
            .collect();
        let stored: Vec<EmbeddingVector> = docs.iter().map(|d| d.vector.clone()).collect();
        let index = build_vector_index(docs).unwrap();
        VectorIndexArtifact::from_index(&index, "mock-embed-3-v1", "h")
            .save(&path)
            .unwrap();
        let reloaded = VectorIndexArtifact::load(&path, "h").unwrap();
        // JSON float round-trip is exact for f64.
        for (doc, original) in reloaded.docs().iter().zip(&stored) {
            assert_eq!(doc.vector, *original);
        }
    }

    #[test]
    fn manifest_rejects_duplicate_targets_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let manifest = RunManifest {
            version: ARTIFACT_VERSION,
            config_hash: "h".into(),
            source_schema: "s".into(),
            target_schema: "t".into(),
            source_schema_hash: "sh".into(),
            target_schema_hash: "th".into(),
            generator_id: "g".into(),
            embedder_id: None,
            baseline: None,
            ablation: AblationFlags::default(),
            index_artifacts: None,
            predictions: vec![RankedPrediction {
                source: ColumnRef::new("s", "a"),
                ranked_targets: vec![ColumnRef::new("t", "x"), ColumnRef::new("T", "X")],
            }],
            failures: vec![],
        };
        manifest.save(&path).unwrap();
        let err = RunManifest::load(&path).unwrap_err();
        assert!(matches!(err, ArtifactError::Invalid { .. }), "{err}");
    }

    #[test]
    fn artifact_version_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("enrichment.json");
        let mut artifact =
            EnrichmentArtifact::new("h", "demo", "target", EnrichmentConfig::default(), vec![]);
        artifact.version = 99;
        artifact.save(&path).unwrap();
        let err = EnrichmentArtifact::load(&path, "h").unwrap_err();
        assert!(matches!(err, ArtifactError::VersionMismatch { .. }));
    }

    #[test]
    fn identical_content_hashes_identically() {
        assert_eq!(sha256_hex(b"abc"), sha256_hex(b"abc"));
        assert_ne!(sha256_hex(b"abc"), sha256_hex(b"abd"));
    }
}
