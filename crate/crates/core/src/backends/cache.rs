//! Per-run response caches keyed by (backend id, model, exact input text).

use std::collections::HashMap;
use std::sync::Arc;

use async_trait::async_trait;
use parking_lot::Mutex;
use tokio::sync::OnceCell;

use super::{Embedder, EmbeddingVector, Generator, EMBED_BATCH_SIZE};
use crate::error::Result;
use crate::types::{BackendDescriptor, GeneratedResponse};

type Key = (String, Option<String>, String);

fn key(descriptor: &BackendDescriptor, text: &str) -> Key {
    (
        descriptor.backend_id.clone(),
        descriptor.model_name.clone(),
        text.to_string(),
    )
}

/// Wraps a generator so each distinct prompt reaches the backend once,
/// even when duplicates are in flight concurrently.
pub struct CachedGenerator {
    inner: Arc<dyn Generator>,
    cells: Mutex<HashMap<Key, Arc<OnceCell<GeneratedResponse>>>>,
}

impl CachedGenerator {
    pub fn new(inner: Arc<dyn Generator>) -> Self {
        CachedGenerator {
            inner,
            cells: Mutex::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[async_trait]
impl Generator for CachedGenerator {
    fn descriptor(&self) -> BackendDescriptor {
        self.inner.descriptor()
    }

    async fn generate(&self, prompt: &str) -> Result<GeneratedResponse> {
        let cell = self
            .cells
            .lock()
            .entry(key(&self.inner.descriptor(), prompt))
            .or_default()
            .clone();
        cell.get_or_try_init(|| self.inner.generate(prompt))
            .await
            .cloned()
    }

    async fn health(&self) -> bool {
        self.inner.health().await
    }
}

/// Wraps an embedder so repeated texts are embedded once; cache misses are
/// sent in batches of at most [`EMBED_BATCH_SIZE`].
pub struct CachedEmbedder {
    inner: Arc<dyn Embedder>,
    vectors: Mutex<HashMap<Key, EmbeddingVector>>,
}

impl CachedEmbedder {
    pub fn new(inner: Arc<dyn Embedder>) -> Self {
        CachedEmbedder {
            inner,
            vectors: Mutex::new(HashMap::new()),
        }
    }
}

#[async_trait]
impl Embedder for CachedEmbedder {
    fn descriptor(&self) -> BackendDescriptor {
        self.inner.descriptor()
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let descriptor = self.inner.descriptor();
        let mut missing: Vec<String> = {
            let cached = self.vectors.lock();
            texts
                .iter()
                .filter(|t| !cached.contains_key(&key(&descriptor, t)))
                .cloned()
                .collect()
        };
        missing.sort();
        missing.dedup();
        for chunk in missing.chunks(EMBED_BATCH_SIZE) {
            let vectors = self.inner.embed(chunk).await?;
            super::check_batch(&vectors, chunk.len())?;
            let mut cached = self.vectors.lock();
            for (text, v) in chunk.iter().zip(vectors) {
                cached.insert(key(&descriptor, text), v);
            }
        }
        let cached = self.vectors.lock();
        Ok(texts
            .iter()
            .map(|t| cached[&key(&descriptor, t)].clone())
            .collect())
    }

    async fn health(&self) -> bool {
        self.inner.health().await
    }
}
