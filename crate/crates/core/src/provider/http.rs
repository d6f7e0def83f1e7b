//! OpenAI-compatible HTTP providers.
//!
//! Both clients speak the widely implemented chat-completion and embedding
//! request shapes, so any endpoint exposing that surface (including local
//! inference servers) can back the pipeline. Credentials come from an
//! environment variable named in the run configuration and are never read
//! from config files.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{
    Embedder, EmbeddingVector, GenerationRequest, ProviderError, RetryPolicy, TextGenerator,
    validate_batch,
};

#[derive(Debug, Clone)]
pub struct HttpProviderConfig {
    /// Base URL, e.g. `https://api.openai.com/v1`.
    pub endpoint: String,
    pub model: String,
    /// Bearer token, if the endpoint requires one.
    pub credential: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl HttpProviderConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            credential: None,
            timeout: Duration::from_secs(60),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_credential(mut self, credential: Option<String>) -> Self {
        self.credential = credential;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn client(&self) -> Result<reqwest::blocking::Client, ProviderError> {
        reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| ProviderError::Configuration {
                message: e.to_string(),
            })
    }

    fn post(&self, path: &str, body: serde_json::Value) -> Result<String, ProviderError> {
        let client = self.client()?;
        let url = format!("{}/{}", self.endpoint.trim_end_matches('/'), path);
        self.retry.run(|| {
            let mut request = client.post(&url).json(&body);
            if let Some(credential) = &self.credential {
                request = request.bearer_auth(credential);
            }
            let response = request.send().map_err(|e| classify(&e))?;
            let status = response.status();
            let text = response.text().map_err(|e| classify(&e))?;
            if status.is_success() {
                Ok(text)
            } else if status.is_server_error() || status.as_u16() == 429 {
                Err(ProviderError::Transport {
                    attempts: 1,
                    message: format!("HTTP {status}: {text}"),
                })
            } else {
                Err(ProviderError::Refusal {
                    message: format!("HTTP {status}: {text}"),
                })
            }
        })
    }
}

fn classify(error: &reqwest::Error) -> ProviderError {
    if error.is_timeout() {
        ProviderError::Timeout { attempts: 1 }
    } else {
        ProviderError::Transport {
            attempts: 1,
            message: error.to_string(),
        }
    }
}

/// Chat-completion client.
pub struct HttpTextGenerator {
    config: HttpProviderConfig,
    id: String,
}

impl HttpTextGenerator {
    pub fn new(config: HttpProviderConfig) -> Self {
        let id = format!("http-gen:{}", config.model);
        Self { config, id }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl TextGenerator for HttpTextGenerator {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, ProviderError> {
        let body = json!({
            "model": self.config.model,
            "temperature": request.temperature,
            "max_tokens": request.max_output_length,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let text = self.config.post("chat/completions", body)?;
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| ProviderError::MalformedResponse {
                message: format!("chat response: {e}"),
            })?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or(ProviderError::MalformedResponse {
                message: "chat response contained no choices".into(),
            })
    }
}

/// Embedding client.
pub struct HttpEmbedder {
    config: HttpProviderConfig,
    dimension: usize,
    id: String,
}

impl HttpEmbedder {
    pub fn new(config: HttpProviderConfig, dimension: usize) -> Self {
        let id = format!("http-embed:{}", config.model);
        Self {
            config,
            dimension,
            id,
        }
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        if texts.is_empty() {
            return Err(ProviderError::EmptyBatch);
        }
        let body = json!({
            "model": self.config.model,
            "input": texts,
        });
        let text = self.config.post("embeddings", body)?;
        let parsed: EmbeddingResponse =
            serde_json::from_str(&text).map_err(|e| ProviderError::MalformedResponse {
                message: format!("embedding response: {e}"),
            })?;
        let mut data = parsed.data;
        data.sort_by_key(|d| d.index);
        let vectors: Vec<EmbeddingVector> = data
            .into_iter()
            .map(|d| EmbeddingVector::new(d.embedding).normalized())
            .collect::<Result<_, _>>()?;
        if let Some(v) = vectors.iter().find(|v| v.dimension() != self.dimension) {
            return Err(ProviderError::DimensionMismatch {
                expected: self.dimension,
                got: v.dimension(),
            });
        }
        validate_batch(self.dimension, texts.len(), &vectors)?;
        Ok(vectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unreachable_endpoint_is_a_transport_error_after_retries() {
        // Port 9 (discard) is not listening in the test environment, so the
        // connection is refused immediately.
        let config = HttpProviderConfig::new("http://127.0.0.1:9/v1", "test-model")
            .with_timeout(Duration::from_secs(2))
            .with_retry(RetryPolicy {
                attempts: 2,
                base_delay: Duration::from_millis(1),
            });
        let generator = HttpTextGenerator::new(config);
        let err = generator
            .generate(&GenerationRequest::new("hello"))
            .unwrap_err();
        match err {
            ProviderError::Transport { attempts, .. } => assert_eq!(attempts, 2),
            ProviderError::Timeout { attempts } => assert_eq!(attempts, 2),
            other => panic!("unexpected error: {other}"),
        }
    }
}
