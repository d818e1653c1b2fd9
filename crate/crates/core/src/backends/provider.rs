use std::sync::Arc;

use super::{Embedder, LexicalEmbedder};
use crate::error::Result;
use crate::types::BackendDescriptor;

/// Hands out an embedder suited to a set of texts.
///
/// Remote models ignore the texts. The lexical embedder uses them to widen
/// its vocabulary so every token being compared is represented.
pub trait EmbedderProvider: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;
    fn embedder_for(&self, texts: &[&str]) -> Result<Arc<dyn Embedder>>;
}

/// Always returns the same embedder.
pub struct FixedEmbedder(pub Arc<dyn Embedder>);

impl EmbedderProvider for FixedEmbedder {
    fn descriptor(&self) -> BackendDescriptor {
        self.0.descriptor()
    }

    fn embedder_for(&self, _texts: &[&str]) -> Result<Arc<dyn Embedder>> {
        Ok(self.0.clone())
    }
}

/// Builds lexical embedders over a base vocabulary plus the requested texts.
#[derive(Debug, Clone, Default)]
pub struct LexicalProvider {
    base: Vec<String>,
}

impl LexicalProvider {
    pub fn new(base_texts: impl IntoIterator<Item = String>) -> Self {
        LexicalProvider {
            base: base_texts.into_iter().collect(),
        }
    }
}

impl EmbedderProvider for LexicalProvider {
    fn descriptor(&self) -> BackendDescriptor {
        use crate::types::BackendKind;
        BackendDescriptor {
            backend_id: super::lexical::LEXICAL_BACKEND_ID.to_string(),
            kind: BackendKind::Embedder,
            endpoint: None,
            model_name: Some("tf-l2".to_string()),
            deterministic: true,
        }
    }

    fn embedder_for(&self, texts: &[&str]) -> Result<Arc<dyn Embedder>> {
        let all = self.base.iter().map(String::as_str).chain(texts.iter().copied());
        Ok(Arc::new(LexicalEmbedder::from_texts(all)?))
    }
}
