//! Shared request handling behind the CLI and the HTTP service, so both
//! produce identical explanations for identical inputs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use tokio::sync::Semaphore;

use crate::backends::{EmbedderProvider, Generator, LimitedGenerator, LimitedProvider, LEXICAL_BACKEND_ID};
use crate::config::AppConfig;
use crate::error::{Error, Result};
use crate::explain::{explain_generation, explain_rag, explain_retrieval_text, RagExplanation};
use crate::rag::{build_index, PromptTemplate, RagPipeline, RagResult, VectorIndex};
use crate::types::{BackendDescriptor, ExplainerConfig, Explanation, Granularity, Prompt, Question};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalRequest {
    pub question: String,
    #[serde(default)]
    pub document_id: Option<String>,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub strategy: Option<String>,
    #[serde(default)]
    pub granularity: Option<Granularity>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub question: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub comparator: Option<String>,
    #[serde(default)]
    pub include_instruction: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendHealth {
    #[serde(flatten)]
    pub descriptor: BackendDescriptor,
    pub reachable: bool,
}

pub struct App {
    pub config: AppConfig,
    index: Option<Arc<VectorIndex>>,
    embedders: Arc<dyn EmbedderProvider>,
    generator: Arc<dyn Generator>,
}

impl App {
    /// Wire up backends from `config`. A loaded index contributes its
    /// documents to the lexical vocabulary.
    pub fn new(config: AppConfig, index: Option<VectorIndex>) -> Result<Self> {
        config.validate()?;
        let base: Vec<String> = index
            .iter()
            .flat_map(|i| i.entries().iter().map(|e| e.document.text.clone()))
            .collect();
        let embedders = config.embedder.provider(base)?;
        let generator = config.generator.build()?;
        Ok(App {
            config,
            index: index.map(Arc::new),
            embedders,
            generator,
        })
    }

    pub fn with_backends(
        config: AppConfig,
        index: Option<VectorIndex>,
        embedders: Arc<dyn EmbedderProvider>,
        generator: Arc<dyn Generator>,
    ) -> Self {
        App {
            config,
            index: index.map(Arc::new),
            embedders,
            generator,
        }
    }

    /// Share one pool of `permits` across all backend calls made through this app.
    pub fn with_backend_limit(mut self, permits: usize) -> Self {
        let semaphore = Arc::new(Semaphore::new(permits.max(1)));
        self.embedders = Arc::new(LimitedProvider::new(self.embedders, semaphore.clone()));
        self.generator = Arc::new(LimitedGenerator::new(self.generator, semaphore));
        self
    }

    pub fn index(&self) -> Option<&VectorIndex> {
        self.index.as_deref()
    }

    pub fn generator(&self) -> Arc<dyn Generator> {
        self.generator.clone()
    }

    pub fn embedders(&self) -> Arc<dyn EmbedderProvider> {
        self.embedders.clone()
    }

    fn require_index(&self) -> Result<&Arc<VectorIndex>> {
        self.index
            .as_ref()
            .ok_or_else(|| Error::NotFound("no index loaded; run `ragx index <path>` first".into()))
    }

    /// Pipeline whose index vectors agree with the embedder used for `question`.
    async fn pipeline_for(&self, question: &str) -> Result<RagPipeline> {
        let stored = self.require_index()?;
        let embedder = self.embedders.embedder_for(&[question])?;
        let descriptor = embedder.descriptor();
        let index = if descriptor.backend_id != LEXICAL_BACKEND_ID && descriptor == stored.embedder {
            stored.clone()
        } else {
            // lexical vocabularies depend on the question, so re-embed locally
            Arc::new(build_index(&stored.corpus(), embedder.as_ref()).await?)
        };
        let mut pipeline = RagPipeline::new(index, embedder, self.generator.clone());
        pipeline.template = PromptTemplate::new(self.config.rag.template.as_str())?;
        pipeline.protect_instruction = self.config.explain.protect_instruction;
        Ok(pipeline)
    }

    pub async fn query(&self, question: &str, k: Option<usize>) -> Result<RagResult> {
        let question = Question::from_text(question)?;
        let pipeline = self.pipeline_for(&question.text).await?;
        pipeline.answer(&question, k.unwrap_or(self.config.rag.k)).await
    }

    pub async fn explain_retrieval(&self, req: &RetrievalRequest) -> Result<Explanation> {
        let question = Question::from_text(req.question.as_str())?;
        let text = match (&req.text, &req.document_id) {
            (Some(text), _) => text.clone(),
            (None, Some(id)) => self
                .require_index()?
                .document(id)
                .ok_or_else(|| Error::NotFound(format!("document `{id}`")))?
                .text
                .clone(),
            (None, None) => {
                return Err(Error::InvalidArgument("either `document_id` or `text` is required".into()))
            }
        };
        let mut config = self.config.explain.clone();
        if let Some(strategy) = &req.strategy {
            config.strategy_id = strategy.clone();
        }
        if req.granularity.is_some() {
            config.granularity = req.granularity;
        }
        let embedder = self.embedders.embedder_for(&[&question.text, &text])?;
        explain_retrieval_text(&question, &text, embedder, &config).await
    }

    fn generation_config(&self, comparator: Option<&str>, include_instruction: Option<bool>) -> ExplainerConfig {
        let mut config = self.config.explain.clone();
        if let Some(c) = comparator {
            config.comparator_id = c.to_string();
        }
        if let Some(include) = include_instruction {
            config.protect_instruction = !include;
        }
        config
    }

    /// Run the pipeline for the question, then explain its generation.
    pub async fn explain_generation(&self, req: &GenerationRequest) -> Result<Explanation> {
        let config = self.generation_config(req.comparator.as_deref(), req.include_instruction);
        let question = Question::from_text(req.question.as_str())?;
        let pipeline = self.pipeline_for(&question.text).await?;
        let result = pipeline.answer(&question, req.k.unwrap_or(self.config.rag.k)).await?;
        explain_generation(
            &result.prompt,
            self.generator.clone(),
            &config,
            Some(&result.response),
            Some(pipeline.embedder.clone()),
        )
        .await
    }

    /// Explain an already rendered prompt. `reference_response` is reused as
    /// the reference output when given.
    pub async fn explain_prompt(
        &self,
        prompt: &str,
        reference_response: Option<&str>,
        comparator: Option<&str>,
    ) -> Result<Explanation> {
        let config = self.generation_config(comparator, None);
        let prompt = Prompt::raw(prompt);
        let reference = reference_response.map(|text| crate::types::GeneratedResponse {
            text: text.to_string(),
            backend_id: self.generator.descriptor().backend_id,
            settings_fingerprint: String::new(),
        });
        let embedder = self.embedders.embedder_for(&[&prompt.rendered])?;
        explain_generation(&prompt, self.generator.clone(), &config, reference.as_ref(), Some(embedder)).await
    }

    /// Pipeline run plus retrieval and generation explanations for it.
    pub async fn explain_all(&self, question: &str, k: Option<usize>) -> Result<(RagResult, RagExplanation)> {
        let question = Question::from_text(question)?;
        let pipeline = self.pipeline_for(&question.text).await?;
        let result = pipeline.answer(&question, k.unwrap_or(self.config.rag.k)).await?;
        let explanations = explain_rag(&result, pipeline.embedder.clone(), self.generator.clone(), &self.config.explain).await?;
        Ok((result, explanations))
    }

    pub async fn health(&self) -> Vec<BackendHealth> {
        let embedder_ok = match self.embedders.embedder_for(&["health"]) {
            Ok(e) => e.health().await,
            Err(_) => false,
        };
        vec![
            BackendHealth {
                descriptor: self.embedders.descriptor(),
                reachable: embedder_ok,
            },
            BackendHealth {
                descriptor: self.generator.descriptor(),
                reachable: self.generator.health().await,
            },
        ]
    }
}
