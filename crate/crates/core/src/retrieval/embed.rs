//! Embedding backends used for semantic re-ranking.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::{post_json, BackendError};

/// Maps texts to fixed-dimension vectors.
///
/// Implementations must be deterministic for identical input and usable
/// from several threads at once.
pub trait EmbeddingBackend: Send + Sync {
    fn name(&self) -> &str;

    fn dimension(&self) -> usize;

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError>;
}

/// Cosine similarity; a zero-norm side yields 0.
///
/// Computed as `dot / sqrt(|a|^2 * |b|^2)` so that a vector compared with
/// itself gives exactly 1.0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)
}

/// Remote embedding service: POST `{"texts": [...]}` returning
/// `{"vectors": [[...], ...]}`.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    endpoint: String,
    dimension: usize,
    timeout: Duration,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, dimension: usize, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            dimension,
            timeout,
        }
    }
}

impl EmbeddingBackend for HttpEmbedder {
    fn name(&self) -> &str {
        "http"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let resp: EmbedResponse = post_json(&self.endpoint, None, self.timeout, &EmbedRequest { texts })?;
        if resp.vectors.len() != texts.len() {
            return Err(BackendError::Protocol(format!(
                "asked for {} vectors, got {}",
                texts.len(),
                resp.vectors.len()
            )));
        }
        if let Some(v) = resp.vectors.iter().find(|v| v.len() != self.dimension) {
            return Err(BackendError::Protocol(format!(
                "expected dimension {}, got {}",
                self.dimension,
                v.len()
            )));
        }
        Ok(resp.vectors)
    }
}
