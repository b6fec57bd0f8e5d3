//! Client for a remote batch embedding service.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecstore::embedder::Embedder;

/// Connection settings for an embedding service. Only the name of the
/// environment variable holding the API key is configured; the key
/// itself is read from the process environment at construction.
#[derive(Debug, Clone)]
pub struct RemoteEmbedderConfig {
    /// Service root; the client posts to `{base_url}/embeddings`.
    pub base_url: String,
    pub model: String,
    /// Dimension the service is expected to return.
    pub dim: usize,
    pub api_key_env: Option<String>,
    /// Maximum texts per request.
    pub batch_size: usize,
    pub timeout_secs: f64,
}

pub struct RemoteEmbedder {
    config: RemoteEmbedderConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteEmbedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteEmbedder")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish_non_exhaustive()
    }
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Result<Self> {
        if config.dim == 0 {
            return Err(Error::Config("embedder dimension must be positive".into()));
        }
        if config.batch_size == 0 {
            return Err(Error::Config("embedder batch size must be positive".into()));
        }
        let api_key = match &config.api_key_env {
            Some(name) => Some(std::env::var(name).map_err(|_| {
                Error::Config(format!("environment variable {name} is not set"))
            })?),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .build()
            .into();
        Ok(RemoteEmbedder {
            config,
            api_key,
            agent,
        })
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>> {
        let url = format!(
            "{}/embeddings",
            self.config.base_url.trim_end_matches('/')
        );
        let payload = EmbeddingRequest {
            model: &self.config.model,
            input: texts,
        };
        let mut request = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            request = request.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(&payload)
            .map_err(|error| Error::Embedder(format!("embedding request failed: {error}")))?;
        let parsed: EmbeddingResponse = response.body_mut().read_json().map_err(|error| {
            Error::Embedder(format!("embedding response is not valid JSON: {error}"))
        })?;
        if parsed.data.len() != texts.len() {
            return Err(Error::Embedder(format!(
                "service returned {} embeddings for {} texts",
                parsed.data.len(),
                texts.len()
            )));
        }
        parsed
            .data
            .into_iter()
            .map(|item| unit_normalize(item.embedding, self.config.dim))
            .collect()
    }
}

/// Vectors are re-normalized locally so downstream cosine scoring can
/// assume unit norm no matter what the service returns.
fn unit_normalize(mut vector: Vec<f32>, dim: usize) -> Result<Vec<f32>> {
    if vector.len() != dim {
        return Err(Error::Embedder(format!(
            "service returned dimension {}, configuration says {dim}",
            vector.len()
        )));
    }
    let norm = vector.iter().map(|v| v * v).sum::<f32>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Embedder(
            "service returned a zero or non-finite vector".into(),
        ));
    }
    for value in &mut vector {
        *value /= norm;
    }
    Ok(vector)
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> String {
        format!("remote-{}-d{}", self.config.model, self.config.dim)
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>> {
        let mut vectors = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.config.batch_size) {
            vectors.extend(self.embed_batch(chunk)?);
        }
        Ok(vectors)
    }
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f32>,
}
