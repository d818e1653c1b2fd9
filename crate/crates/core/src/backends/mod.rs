//! Black-box embedders and generators.
//!
//! Every model is reached through [`Embedder`] or [`Generator`]; the
//! explainers never look inside. Local deterministic implementations live
//! next to OpenAI-compatible HTTP clients.

mod cache;
mod lexical;
mod limit;
mod mock;
mod openai;
mod provider;

use async_trait::async_trait;
use serde::Serialize;

pub use cache::{CachedEmbedder, CachedGenerator};
pub use lexical::{lexical_tokens, local_lexical_embedder, LexicalEmbedder, LEXICAL_BACKEND_ID};
pub use limit::{LimitedEmbedder, LimitedGenerator, LimitedProvider};
pub use mock::{ExtractiveMockGenerator, MOCK_BACKEND_ID};
pub use provider::{EmbedderProvider, FixedEmbedder, LexicalProvider};
pub use openai::{
    ChatMessage, ChatRequest, EmbeddingsRequest, OpenAiEmbedder, OpenAiGenerator, RetryPolicy,
    API_KEY_ENV,
};

use crate::error::{Error, Result};
use crate::types::{BackendDescriptor, GeneratedResponse};

/// Maximum number of texts sent in one embeddings request.
pub const EMBED_BATCH_SIZE: usize = 64;

/// A unit-normalized embedding, or the all-zero vector reserved for empty text.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// L2-normalize `values`. An all-zero input stays the zero vector.
    pub fn normalized(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("embedding"));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(EmbeddingVector(values))
    }

    pub fn zero(dimension: usize) -> Self {
        EmbeddingVector(vec![0.0; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity clamped to `[-1, 1]`; 0.0 when either side is the zero vector.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dimension() != b.dimension() {
        return Err(Error::Dimension {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    if a.is_zero() || b.is_zero() {
        return Ok(0.0);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (a.norm() * b.norm())).clamp(-1.0, 1.0))
}

#[async_trait]
pub trait Embedder: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    /// Embed a non-empty batch. Output order matches input order.
    async fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;

    async fn health(&self) -> bool {
        true
    }
}

#[async_trait]
pub trait Generator: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    async fn generate(&self, prompt: &str) -> Result<GeneratedResponse>;

    async fn health(&self) -> bool {
        true
    }
}

pub async fn embed_one(embedder: &dyn Embedder, text: &str) -> Result<EmbeddingVector> {
    let mut out = embedder.embed(&[text.to_string()]).await?;
    out.pop()
        .ok_or_else(|| Error::BackendProtocol("empty embeddings response".into()))
}

pub(crate) fn check_batch(vectors: &[EmbeddingVector], expected: usize) -> Result<()> {
    if vectors.len() != expected {
        return Err(Error::BackendProtocol(format!(
            "expected {expected} embeddings, got {}",
            vectors.len()
        )));
    }
    if let Some(first) = vectors.first() {
        if let Some(bad) = vectors.iter().find(|v| v.dimension() != first.dimension()) {
            return Err(Error::BackendProtocol(format!(
                "mixed embedding dimensions {} and {}",
                first.dimension(),
                bad.dimension()
            )));
        }
    }
    Ok(())
}
