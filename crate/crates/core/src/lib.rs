//! Post-hoc, model-agnostic explanations for retrieval-augmented generation.
//!
//! `ragx` runs a small open-book QA pipeline (ingest, embed, retrieve,
//! prompt, generate) and explains two things about any run:
//!
//! * why the retriever scored a document as it did for a question, by
//!   removing one word at a time and re-scoring against the question;
//! * which parts of the prompt drove the answer, by removing one sentence
//!   at a time, regenerating, and comparing with the original answer.
//!
//! Models are reached only through the [`backends::Embedder`] and
//! [`backends::Generator`] traits, so the same explainers work for local
//! reference backends and any OpenAI-compatible server.
//!
//! ```no_run
//! # async fn demo() -> ragx::Result<()> {
//! use std::sync::Arc;
//! use ragx::backends::LexicalEmbedder;
//! use ragx::{explain, ExplainerConfig, Question};
//!
//! let question = Question::from_text("what color is the sky")?;
//! let text = "the sky is blue";
//! let embedder = Arc::new(LexicalEmbedder::from_texts([question.text.as_str(), text])?);
//! let explanation =
//!     explain::explain_retrieval_text(&question, text, embedder, &ExplainerConfig::default()).await?;
//! println!("{}", ragx::render::render_ansi(&explanation, None));
//! # Ok(())
//! # }
//! ```

pub mod app;
pub mod backends;
pub mod cli;
pub mod config;
pub mod decompose;
pub mod error;
pub mod eval;
pub mod explain;
pub mod perturb;
pub mod rag;
pub mod render;
pub mod service;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    fingerprint, AttributedFeature, BackendDescriptor, Document, ExplainerConfig, Explanation,
    ExplanationTarget, Feature, GeneratedResponse, Granularity, PerturbationOutcome, Prompt,
    Question, Span,
};
