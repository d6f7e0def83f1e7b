//! On-disk response cache keyed by content hash.
//!
//! All pipeline calls run at temperature 0, so a response is a pure
//! function of (provider id, request payload) and can be replayed from
//! disk. Generation requests are cached whole; embedding requests are
//! cached per individual text so overlapping batches share entries.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{
    Embedder, EmbeddingVector, GenerationRequest, ProviderError, TextGenerator, validate_batch,
};

/// Cache key: provider id plus a SHA-256 hash of the full request payload.
/// Identical requests to the same provider always produce identical keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub provider_id: String,
    pub content_hash: String,
}

impl CacheKey {
    pub fn for_payload(provider_id: &str, payload: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(provider_id.as_bytes());
        hasher.update(b"\0");
        hasher.update(payload.as_bytes());
        Self {
            provider_id: provider_id.to_string(),
            content_hash: hex::encode(hasher.finalize()),
        }
    }
}

/// A directory of cached responses, one file per key.
///
/// Writes go to a temp file first and are renamed into place, so concurrent
/// writers of the same key serialize on the final atomic rename and readers
/// never observe partial content.
#[derive(Debug, Clone)]
pub struct DiskCache {
    root: PathBuf,
}

impl DiskCache {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self, ProviderError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    fn path(&self, key: &CacheKey) -> PathBuf {
        self.root
            .join(&key.provider_id)
            .join(format!("{}.json", key.content_hash))
    }

    pub fn get(&self, key: &CacheKey) -> Option<String> {
        fs::read_to_string(self.path(key)).ok()
    }

    pub fn put(&self, key: &CacheKey, value: &str) -> Result<(), ProviderError> {
        let path = self.path(key);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
        fs::write(&tmp, value)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

/// Caching wrapper around any [`TextGenerator`].
pub struct CachedGenerator<G> {
    inner: G,
    cache: DiskCache,
}

impl<G: TextGenerator> CachedGenerator<G> {
    pub fn new(inner: G, cache: DiskCache) -> Self {
        Self { inner, cache }
    }
}

impl<G: TextGenerator> TextGenerator for CachedGenerator<G> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, ProviderError> {
        let payload = serde_json::to_string(request).expect("request serialization");
        let key = CacheKey::for_payload(self.inner.id(), &payload);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let response = self.inner.generate(request)?;
        self.cache.put(&key, &response)?;
        Ok(response)
    }
}

/// Caching wrapper around any [`Embedder`]. Each text is cached under its
/// own key; only the misses are forwarded to the inner provider.
pub struct CachedEmbedder<E> {
    inner: E,
    cache: DiskCache,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E, cache: DiskCache) -> Self {
        Self { inner, cache }
    }

    fn key(&self, text: &str) -> CacheKey {
        CacheKey::for_payload(self.inner.id(), &format!("embed\0{text}"))
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        if texts.is_empty() {
            return Err(ProviderError::EmptyBatch);
        }
        let mut results: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
        let mut misses = Vec::new();
        for (i, text) in texts.iter().enumerate() {
            match self.cache.get(&self.key(text)) {
                Some(raw) => {
                    let values: Vec<f64> = serde_json::from_str(&raw).map_err(|e| {
                        ProviderError::MalformedResponse {
                            message: format!("corrupt cache entry: {e}"),
                        }
                    })?;
                    results[i] = Some(EmbeddingVector::new(values));
                }
                None => misses.push(i),
            }
        }
        if !misses.is_empty() {
            let batch: Vec<String> = misses.iter().map(|&i| texts[i].clone()).collect();
            let vectors = self.inner.embed(&batch)?;
            validate_batch(self.inner.dimension(), batch.len(), &vectors)?;
            for (&i, vector) in misses.iter().zip(vectors) {
                let raw = serde_json::to_string(vector.values()).expect("vector serialization");
                self.cache.put(&self.key(&texts[i]), &raw)?;
                results[i] = Some(vector);
            }
        }
        Ok(results.into_iter().map(|v| v.expect("filled")).collect())
    }
}
