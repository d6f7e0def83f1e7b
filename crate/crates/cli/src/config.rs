//! Run configuration: a single TOML file describing paths, providers, and
//! every stage's parameters. Credentials never live in the file; the config
//! names an environment variable instead.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use schematch_core::artifact::sha256_hex;
use schematch_core::enrich::EnrichmentConfig;
use schematch_core::eval::NaPolicy;
use schematch_core::lexical::Bm25Params;
use schematch_core::pipeline::{AblationFlags, DEFAULT_EMIT_K, RetrievalConfig};
use schematch_core::provider::cache::{CachedEmbedder, CachedGenerator, DiskCache};
use schematch_core::provider::http::{HttpEmbedder, HttpProviderConfig, HttpTextGenerator};
use schematch_core::provider::mock::{DEFAULT_RANKING_CAPACITY, MockEmbedder, MockTextGenerator};
use schematch_core::provider::{Embedder, TextGenerator};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathsConfig {
    pub source_schema: PathBuf,
    pub target_schema: PathBuf,
    #[serde(default)]
    pub ground_truth: Option<PathBuf>,
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    #[serde(default = "default_artifact_dir")]
    pub artifact_dir: PathBuf,
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from(".schematch-cache")
}

fn default_artifact_dir() -> PathBuf {
    PathBuf::from("artifacts")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProviderConfig {
    #[serde(default = "default_kind")]
    pub kind: ProviderKind,
    #[serde(default = "default_generation_model")]
    pub generation_model: String,
    #[serde(default = "default_embedding_model")]
    pub embedding_model: String,
    #[serde(default = "default_dimension")]
    pub embedding_dimension: usize,
    #[serde(default)]
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token. Empty
    /// means the endpoint needs none.
    #[serde(default)]
    pub credential_env: String,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_context_budget")]
    pub context_budget_tokens: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Candidate-list size beyond which the mock ranker degrades; only
    /// meaningful with `kind = "mock"`.
    #[serde(default = "default_mock_capacity")]
    pub mock_ranking_capacity: usize,
}

fn default_kind() -> ProviderKind {
    ProviderKind::Mock
}

fn default_generation_model() -> String {
    "gpt-4.1".into()
}

fn default_embedding_model() -> String {
    "text-embedding-3-small".into()
}

fn default_dimension() -> usize {
    384
}

fn default_parallelism() -> usize {
    4
}

fn default_context_budget() -> usize {
    100_000
}

fn default_timeout_secs() -> u64 {
    60
}

fn default_mock_capacity() -> usize {
    DEFAULT_RANKING_CAPACITY
}

impl Default for ProviderConfig {
    fn default() -> Self {
        toml::from_str("").expect("all provider fields have defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    #[serde(default)]
    pub na_policy: NaPolicy,
}

fn default_ks() -> Vec<usize> {
    vec![1, 3, 5]
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: default_ks(),
            na_policy: NaPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default)]
    pub enrichment: EnrichmentConfig,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub bm25: Bm25Params,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default = "default_emit_k")]
    pub emit_k: usize,
}

fn default_emit_k() -> usize {
    DEFAULT_EMIT_K
}

impl RunConfig {
    /// Load a config file and resolve every relative path against the
    /// file's own directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut config: RunConfig = toml::from_str(&text).map_err(|e| {
            CliError::Validation(format!("cannot parse config {}: {e}", path.display()))
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        config.paths.source_schema = resolve(&config.paths.source_schema);
        config.paths.target_schema = resolve(&config.paths.target_schema);
        config.paths.ground_truth = config.paths.ground_truth.as_ref().map(&resolve);
        config.paths.cache_dir = resolve(&config.paths.cache_dir);
        config.paths.artifact_dir = resolve(&config.paths.artifact_dir);
        config.validate()?;
        Ok(config)
    }

    /// Everything that can be checked without touching a provider.
    pub fn validate(&self) -> Result<(), CliError> {
        if !self.paths.source_schema.is_file() {
            return Err(CliError::Validation(format!(
                "source schema not found: {}",
                self.paths.source_schema.display()
            )));
        }
        if !self.paths.target_schema.is_file() {
            return Err(CliError::Validation(format!(
                "target schema not found: {}",
                self.paths.target_schema.display()
            )));
        }
        if let Some(gt) = &self.paths.ground_truth
            && !gt.is_file()
        {
            return Err(CliError::Validation(format!(
                "ground truth not found: {}",
                gt.display()
            )));
        }
        self.enrichment
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        self.bm25
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        if self.emit_k == 0 {
            return Err(CliError::Validation("emit_k must be >= 1".into()));
        }
        if self.eval.ks.contains(&0) {
            return Err(CliError::Validation("eval ks must be >= 1".into()));
        }
        if let Some(&max_k) = self.eval.ks.iter().max()
            && max_k > self.emit_k
        {
            return Err(CliError::Validation(format!(
                "eval k {max_k} exceeds emit_k {}; predictions would be too short",
                self.emit_k
            )));
        }
        if self.provider.kind == ProviderKind::Http {
            if self.provider.endpoint.trim().is_empty() {
                return Err(CliError::Validation(
                    "provider.endpoint is required with kind = \"http\"".into(),
                ));
            }
            if !self.provider.credential_env.is_empty()
                && std::env::var(&self.provider.credential_env).is_err()
            {
                return Err(CliError::Validation(format!(
                    "environment variable {} (named by provider.credential_env) is not set",
                    self.provider.credential_env
                )));
            }
        }
        Ok(())
    }

    /// Construct the configured providers, wrapped in the on-disk cache.
    pub fn providers(&self) -> Result<Providers, CliError> {
        let cache = DiskCache::new(&self.paths.cache_dir)
            .map_err(|e| CliError::Validation(format!("cannot create cache dir: {e}")))?;
        match self.provider.kind {
            ProviderKind::Mock => {
                let generator =
                    MockTextGenerator::with_ranking_capacity(self.provider.mock_ranking_capacity);
                let embedder = MockEmbedder::new(self.provider.embedding_dimension);
                Ok(Providers {
                    generator: Arc::new(CachedGenerator::new(generator, cache.clone())),
                    embedder: Arc::new(CachedEmbedder::new(embedder, cache)),
                })
            }
            ProviderKind::Http => {
                let credential = if self.provider.credential_env.is_empty() {
                    None
                } else {
                    std::env::var(&self.provider.credential_env).ok()
                };
                let timeout = Duration::from_secs(self.provider.timeout_secs);
                let generation = HttpProviderConfig::new(
                    &self.provider.endpoint,
                    &self.provider.generation_model,
                )
                .with_credential(credential.clone())
                .with_timeout(timeout);
                let embedding = HttpProviderConfig::new(
                    &self.provider.endpoint,
                    &self.provider.embedding_model,
                )
                .with_credential(credential)
                .with_timeout(timeout);
                Ok(Providers {
                    generator: Arc::new(CachedGenerator::new(
                        HttpTextGenerator::new(generation),
                        cache.clone(),
                    )),
                    embedder: Arc::new(CachedEmbedder::new(
                        HttpEmbedder::new(embedding, self.provider.embedding_dimension),
                        cache,
                    )),
                })
            }
        }
    }

    /// Hash of everything that shapes artifact content: provider identity,
    /// stage parameters, ablation flags, and the schema file contents.
    /// Evaluation-time settings (ks, NA policy) deliberately stay out so
    /// re-scoring a manifest at different K never invalidates it.
    pub fn fingerprint(&self, flags: &AblationFlags) -> Result<String, CliError> {
        let source_schema = std::fs::read(&self.paths.source_schema)
            .map_err(|e| CliError::Validation(format!("cannot read source schema: {e}")))?;
        let target_schema = std::fs::read(&self.paths.target_schema)
            .map_err(|e| CliError::Validation(format!("cannot read target schema: {e}")))?;
        let fingerprint = Fingerprint {
            provider_kind: self.provider.kind,
            generation_model: &self.provider.generation_model,
            embedding_model: &self.provider.embedding_model,
            embedding_dimension: self.provider.embedding_dimension,
            mock_ranking_capacity: match self.provider.kind {
                ProviderKind::Mock => Some(self.provider.mock_ranking_capacity),
                ProviderKind::Http => None,
            },
            enrichment: &self.enrichment,
            retrieval: &self.retrieval,
            bm25: &self.bm25,
            ablation: flags,
            emit_k: self.emit_k,
            source_schema_sha256: sha256_hex(&source_schema),
            target_schema_sha256: sha256_hex(&target_schema),
        };
        let canonical = serde_json::to_string(&fingerprint).expect("fingerprint serialization");
        Ok(sha256_hex(canonical.as_bytes()))
    }
}

/// The serialized shape whose hash stamps every artifact. Field order is
/// part of the format; extend only by appending.
#[derive(Serialize)]
struct Fingerprint<'a> {
    provider_kind: ProviderKind,
    generation_model: &'a str,
    embedding_model: &'a str,
    embedding_dimension: usize,
    mock_ranking_capacity: Option<usize>,
    enrichment: &'a EnrichmentConfig,
    retrieval: &'a RetrievalConfig,
    bm25: &'a Bm25Params,
    ablation: &'a AblationFlags,
    emit_k: usize,
    source_schema_sha256: String,
    target_schema_sha256: String,
}

/// The configured generation and embedding backends.
pub struct Providers {
    pub generator: Arc<dyn TextGenerator>,
    pub embedder: Arc<dyn Embedder>,
}
