//! Global caps on in-flight backend calls.

use std::sync::Arc;

use async_trait::async_trait;
use tokio::sync::Semaphore;

use super::{Embedder, EmbedderProvider, EmbeddingVector, Generator};
use crate::error::{Error, Result};
use crate::types::{BackendDescriptor, GeneratedResponse};

pub struct LimitedEmbedder {
    inner: Arc<dyn Embedder>,
    permits: Arc<Semaphore>,
}

impl LimitedEmbedder {
    pub fn new(inner: Arc<dyn Embedder>, permits: Arc<Semaphore>) -> Self {
        LimitedEmbedder { inner, permits }
    }
}

#[async_trait]
impl Embedder for LimitedEmbedder {
    fn descriptor(&self) -> BackendDescriptor {
        self.inner.descriptor()
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let _permit = self
            .permits
            .acquire()
            .await
            .map_err(|_| Error::BackendUnavailable("backend limiter closed".into()))?;
        self.inner.embed(texts).await
    }

    async fn health(&self) -> bool {
        self.inner.health().await
    }
}

pub struct LimitedGenerator {
    inner: Arc<dyn Generator>,
    permits: Arc<Semaphore>,
}

impl LimitedGenerator {
    pub fn new(inner: Arc<dyn Generator>, permits: Arc<Semaphore>) -> Self {
        LimitedGenerator { inner, permits }
    }
}

#[async_trait]
impl Generator for LimitedGenerator {
    fn descriptor(&self) -> BackendDescriptor {
        self.inner.descriptor()
    }

    async fn generate(&self, prompt: &str) -> Result<GeneratedResponse> {
        let _permit = self
            .permits
            .acquire()
            .await
            .map_err(|_| Error::BackendUnavailable("backend limiter closed".into()))?;
        self.inner.generate(prompt).await
    }

    async fn health(&self) -> bool {
        self.inner.health().await
    }
}

/// Wraps every embedder a provider hands out in the same limiter.
pub struct LimitedProvider {
    inner: Arc<dyn EmbedderProvider>,
    permits: Arc<Semaphore>,
}

impl LimitedProvider {
    pub fn new(inner: Arc<dyn EmbedderProvider>, permits: Arc<Semaphore>) -> Self {
        LimitedProvider { inner, permits }
    }
}

impl EmbedderProvider for LimitedProvider {
    fn descriptor(&self) -> BackendDescriptor {
        self.inner.descriptor()
    }

    fn embedder_for(&self, texts: &[&str]) -> Result<Arc<dyn Embedder>> {
        let inner = self.inner.embedder_for(texts)?;
        Ok(Arc::new(LimitedEmbedder::new(inner, self.permits.clone())))
    }
}
