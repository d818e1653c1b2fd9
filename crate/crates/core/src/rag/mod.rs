//! The open-book QA pipeline under explanation: ingest, index, retrieve,
//! compose a prompt and generate an answer.

mod index;
mod ingest;
mod prompt;

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use index::{build_index, IndexEntry, VectorIndex};
pub use ingest::ingest;
pub use prompt::{compose_prompt, PromptTemplate, DEFAULT_TEMPLATE};

use crate::backends::{Embedder, Generator};
use crate::error::{Error, Result};
use crate::types::{Document, GeneratedResponse, Prompt, Question};

/// Ordered collection of documents with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Corpus { documents })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }
}

/// One document returned by the retriever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieved {
    pub doc: Document,
    pub score: f64,
}

/// Everything the pipeline produced for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RagResult {
    pub question: Question,
    /// Sorted by score descending.
    pub retrieved: Vec<Retrieved>,
    pub prompt: Prompt,
    pub response: GeneratedResponse,
}

pub struct RagPipeline {
    pub index: Arc<VectorIndex>,
    pub embedder: Arc<dyn Embedder>,
    pub generator: Arc<dyn Generator>,
    pub template: PromptTemplate,
    pub protect_instruction: bool,
}

impl RagPipeline {
    pub fn new(index: Arc<VectorIndex>, embedder: Arc<dyn Embedder>, generator: Arc<dyn Generator>) -> Self {
        RagPipeline {
            index,
            embedder,
            generator,
            template: PromptTemplate::default(),
            protect_instruction: true,
        }
    }

    pub async fn retrieve(&self, question: &Question, k: usize) -> Result<Vec<Retrieved>> {
        self.index.search(self.embedder.as_ref(), &question.text, k).await
    }

    /// search, compose the prompt, generate.
    pub async fn answer(&self, question: &Question, k: usize) -> Result<RagResult> {
        let retrieved = self.retrieve(question, k).await?;
        let docs: Vec<Document> = retrieved.iter().map(|r| r.doc.clone()).collect();
        let prompt = compose_prompt(&self.template, &question.text, &docs, self.protect_instruction)?;
        let response = self.generator.generate(&prompt.rendered).await?;
        Ok(RagResult {
            question: question.clone(),
            retrieved,
            prompt,
            response,
        })
    }
}
