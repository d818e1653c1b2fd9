use std::collections::BTreeMap;

use async_trait::async_trait;

use super::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::rag::Corpus;
use crate::types::{BackendDescriptor, BackendKind};

pub const LEXICAL_BACKEND_ID: &str = "local-lexical";

/// Lowercased alphanumeric runs.
pub fn lexical_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Deterministic term-frequency embedder over a fixed vocabulary.
///
/// Texts are embedded as L2-normalized term-frequency vectors; tokens outside
/// the vocabulary are ignored. When the vocabulary covers both texts being
/// compared, the cosine equals the plain TF cosine of the two texts, which
/// is why callers build it over the corpus plus the texts under scrutiny.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexicalEmbedder {
    vocabulary: BTreeMap<String, usize>,
}

impl LexicalEmbedder {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut tokens: Vec<String> = texts.into_iter().flat_map(lexical_tokens).collect();
        if tokens.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        tokens.sort();
        tokens.dedup();
        let vocabulary = tokens.into_iter().enumerate().map(|(i, t)| (t, i)).collect();
        Ok(LexicalEmbedder { vocabulary })
    }

    /// A new embedder whose vocabulary also covers `texts`.
    pub fn extended<'a>(&self, texts: impl IntoIterator<Item = &'a str>) -> Self {
        let extra: Vec<String> = texts.into_iter().flat_map(lexical_tokens).collect();
        let mut words: Vec<String> = self.vocabulary.keys().cloned().chain(extra).collect();
        words.sort();
        words.dedup();
        LexicalEmbedder {
            vocabulary: words.into_iter().enumerate().map(|(i, t)| (t, i)).collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.vocabulary.keys().map(String::as_str)
    }

    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        let mut counts = vec![0.0; self.dimension()];
        for token in lexical_tokens(text) {
            if let Some(&i) = self.vocabulary.get(&token) {
                counts[i] += 1.0;
            }
        }
        EmbeddingVector::normalized(counts).expect("term counts are finite")
    }
}

pub fn local_lexical_embedder(corpus: &Corpus) -> Result<LexicalEmbedder> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    LexicalEmbedder::from_texts(corpus.documents().iter().map(|d| d.text.as_str()))
}

#[async_trait]
impl Embedder for LexicalEmbedder {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            backend_id: LEXICAL_BACKEND_ID.to_string(),
            kind: BackendKind::Embedder,
            endpoint: None,
            model_name: Some("tf-l2".to_string()),
            deterministic: true,
        }
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::InvalidArgument("embed called with no texts".into()));
        }
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}
