//! Pluggable text-generation and embedding backends.
//!
//! The pipeline never talks to a concrete service directly: it goes through
//! the [`TextGenerator`] and [`Embedder`] traits. Three families of
//! implementations live here:
//!
//! - [`mock`] — deterministic offline providers used by tests and the
//!   `--mock-providers` mode; the full pipeline runs without network access.
//! - [`http`] — OpenAI-compatible chat-completion and embedding clients
//!   with bounded retries and exponential backoff.
//! - [`cache`] — an on-disk cache that wraps any provider; temperature-0
//!   responses are safe to replay, so repeated enrichment of a large schema
//!   costs one call per distinct request.

pub mod cache;
pub mod http;
pub mod mock;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProviderError {
    /// Network-level failure; retried with backoff up to the attempt bound.
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    /// The provider rejected the request (auth failure, content policy,
    /// malformed request). Not retryable.
    #[error("provider refused the request: {message}")]
    Refusal { message: String },
    #[error("provider returned vectors of inconsistent dimension: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot normalize a zero-length or zero-norm vector")]
    ZeroVector,
    #[error("embedding request must contain at least one text")]
    EmptyBatch,
    #[error("malformed provider response: {message}")]
    MalformedResponse { message: String },
    #[error("provider configuration error: {message}")]
    Configuration { message: String },
    #[error("cache I/O error: {0}")]
    Cache(#[from] std::io::Error),
}

impl ProviderError {
    /// Only transport-class failures are worth retrying.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            ProviderError::Transport { .. } | ProviderError::Timeout { .. }
        )
    }
}

/// A single text-generation request. The pipeline always sends
/// `temperature: 0.0`, which is what makes response caching sound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_output_length: usize,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            temperature: 0.0,
            max_output_length: 1024,
        }
    }
}

/// A dense embedding. Providers return unit-normalized vectors (Euclidean
/// norm 1 within 1e-6), so cosine similarity reduces to a dot product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Scale to unit norm. Zero vectors cannot be normalized.
    pub fn normalized(&self) -> Result<Self, ProviderError> {
        let norm = self.norm();
        if norm.is_nan() || !norm.is_finite() || norm <= 0.0 {
            return Err(ProviderError::ZeroVector);
        }
        Ok(Self {
            values: self.values.iter().map(|v| v / norm).collect(),
        })
    }

    pub fn is_unit(&self, tolerance: f64) -> bool {
        (self.norm() - 1.0).abs() <= tolerance
    }
}

/// Text-generation backend. Implementations must be safe to call from
/// multiple worker threads.
pub trait TextGenerator: Send + Sync {
    /// Stable identifier ("model id") recorded in artifacts and cache keys.
    fn id(&self) -> &str;

    fn generate(&self, request: &GenerationRequest) -> Result<String, ProviderError>;
}

/// Embedding backend. One vector per input text, order-preserving,
/// unit-normalized.
pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;

    fn dimension(&self) -> usize;

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError>;
}

impl<T: TextGenerator + ?Sized> TextGenerator for Arc<T> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, ProviderError> {
        (**self).generate(request)
    }
}

impl<T: Embedder + ?Sized> Embedder for Arc<T> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        (**self).embed(texts)
    }
}

/// Check a returned batch for the contracted shape: one vector per input,
/// all of the expected dimension, unit-normalized.
pub fn validate_batch(
    expected_dimension: usize,
    texts: usize,
    vectors: &[EmbeddingVector],
) -> Result<(), ProviderError> {
    if vectors.len() != texts {
        return Err(ProviderError::MalformedResponse {
            message: format!("expected {texts} vectors, got {}", vectors.len()),
        });
    }
    for vector in vectors {
        if vector.dimension() != expected_dimension {
            return Err(ProviderError::DimensionMismatch {
                expected: expected_dimension,
                got: vector.dimension(),
            });
        }
        if !vector.is_unit(1e-6) {
            return Err(ProviderError::MalformedResponse {
                message: format!("vector norm {} is not 1", vector.norm()),
            });
        }
    }
    Ok(())
}

/// Retry policy for transport-class failures: `attempts` tries total, with
/// exponential backoff starting at `base_delay`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    #[serde(with = "duration_millis")]
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    /// Run `op`, retrying on retryable errors. The error from the final
    /// attempt is returned with its attempt counter set to the total tries.
    pub fn run<T>(
        &self,
        mut op: impl FnMut() -> Result<T, ProviderError>,
    ) -> Result<T, ProviderError> {
        let attempts = self.attempts.max(1);
        let mut delay = self.base_delay;
        for attempt in 1..=attempts {
            match op() {
                Ok(value) => return Ok(value),
                Err(e) if e.is_retryable() && attempt < attempts => {
                    std::thread::sleep(delay);
                    delay *= 2;
                }
                Err(e) => {
                    return Err(match e {
                        ProviderError::Transport { message, .. } => ProviderError::Transport {
                            attempts: attempt,
                            message,
                        },
                        ProviderError::Timeout { .. } => {
                            ProviderError::Timeout { attempts: attempt }
                        }
                        other => other,
                    });
                }
            }
        }
        unreachable!("loop always returns")
    }
}

/// Apply `f` to every item with at most `parallelism` invocations in
/// flight. Results come back in input order regardless of scheduling, which
/// keeps downstream artifacts deterministic.
pub fn parallel_map<T: Sync, U: Send>(
    parallelism: usize,
    items: &[T],
    f: impl Fn(&T) -> U + Sync,
) -> Vec<U> {
    use std::sync::Mutex;
    use std::sync::atomic::{AtomicUsize, Ordering};

    let workers = parallelism.clamp(1, items.len().max(1));
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<U>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(item) = items.get(i) else { break };
                    *slots[i].lock().unwrap() = Some(f(item));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .unwrap()
                .expect("worker filled every slot")
        })
        .collect()
}

mod duration_millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        (d.as_millis() as u64).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retry_policy_retries_only_transport_errors() {
        let mut calls = 0;
        let policy = RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(1),
        };
        let result: Result<(), _> = policy.run(|| {
            calls += 1;
            Err(ProviderError::Transport {
                attempts: 1,
                message: "connection refused".into(),
            })
        });
        assert_eq!(calls, 3);
        match result.unwrap_err() {
            ProviderError::Transport { attempts, .. } => assert_eq!(attempts, 3),
            other => panic!("unexpected {other}"),
        }

        let mut calls = 0;
        let result: Result<(), _> = policy.run(|| {
            calls += 1;
            Err(ProviderError::Refusal {
                message: "nope".into(),
            })
        });
        assert_eq!(calls, 1);
        assert!(matches!(result, Err(ProviderError::Refusal { .. })));
    }

    #[test]
    fn retry_policy_recovers_after_transient_failure() {
        let mut calls = 0;
        let policy = RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(1),
        };
        let value = policy
            .run(|| {
                calls += 1;
                if calls < 2 {
                    Err(ProviderError::Timeout { attempts: 1 })
                } else {
                    Ok(42)
                }
            })
            .unwrap();
        assert_eq!(value, 42);
        assert_eq!(calls, 2);
    }

    #[test]
    fn zero_vector_cannot_be_normalized() {
        let v = EmbeddingVector::new(vec![0.0, 0.0]);
        assert!(matches!(v.normalized(), Err(ProviderError::ZeroVector)));
        assert!(matches!(
            EmbeddingVector::new(vec![]).normalized(),
            Err(ProviderError::ZeroVector)
        ));
    }

    #[test]
    fn validate_batch_flags_dimension_mismatch() {
        let ok = EmbeddingVector::new(vec![1.0, 0.0]);
        let bad = EmbeddingVector::new(vec![1.0, 0.0, 0.0]);
        let err = validate_batch(2, 2, &[ok, bad]).unwrap_err();
        assert!(matches!(
            err,
            ProviderError::DimensionMismatch {
                expected: 2,
                got: 3
            }
        ));
    }
}
