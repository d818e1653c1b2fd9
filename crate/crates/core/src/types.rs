//! Domain types shared by every stage of the pipeline.
//!
//! All character offsets are Unicode scalar-value indices, never byte
//! offsets, so spans stay portable across the CLI, the HTTP service and
//! browser clients.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Half-open character range `[start, end)`. Serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn intersects(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl From<(usize, usize)> for Span {
    fn from((start, end): (usize, usize)) -> Self {
        Span { start, end }
    }
}

impl From<Span> for (usize, usize) {
    fn from(span: Span) -> Self {
        (span.start, span.end)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Number of Unicode scalar values in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Slice `text` by a character span. Out-of-range ends are clamped.
pub fn char_slice(text: &str, span: Span) -> &str {
    let start = byte_offset(text, span.start);
    let end = byte_offset(text, span.end.max(span.start));
    &text[start..end]
}

fn byte_offset(text: &str, char_idx: usize) -> usize {
    text.char_indices()
        .nth(char_idx)
        .map(|(b, _)| b)
        .unwrap_or(text.len())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
}

impl Question {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Question { id: id.into(), text })
    }

    /// A question whose id is a digest of its text.
    pub fn from_text(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        let id = short_digest(text.as_bytes());
        Question::new(id, text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Document {
            id: id.into(),
            text,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }
}

/// A fully rendered prompt plus the pieces it was rendered from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    /// The instruction template the prompt was rendered from.
    pub instruction: String,
    /// `(document id, text)` pairs in retrieval order.
    pub context_blocks: Vec<(String, String)>,
    pub question_text: String,
    pub rendered: String,
    /// Sorted, disjoint character ranges of `rendered` that must not be perturbed.
    pub protected_spans: Vec<Span>,
    /// Set when the prompt was composed with no context documents.
    #[serde(default)]
    pub empty_context: bool,
}

impl Prompt {
    /// A prompt consisting only of already-rendered text, with nothing protected.
    pub fn raw(rendered: impl Into<String>) -> Self {
        let rendered = rendered.into();
        Prompt {
            instruction: String::new(),
            context_blocks: Vec::new(),
            question_text: String::new(),
            rendered,
            protected_spans: Vec::new(),
            empty_context: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedResponse {
    pub text: String,
    pub backend_id: String,
    pub settings_fingerprint: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Word,
    Sentence,
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" => Ok(Granularity::Word),
            "sentence" => Ok(Granularity::Sentence),
            other => Err(Error::InvalidArgument(format!("unknown granularity `{other}`"))),
        }
    }
}

/// One decomposed unit of an input text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub index: usize,
    pub text: String,
    pub span: Span,
    pub granularity: Granularity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbedInput {
    pub feature_index: usize,
    pub text: String,
    pub strategy_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    RetrievalScore,
    GeneratedText,
}

/// What happened when one perturbed input was re-scored or re-generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationOutcome {
    pub feature_index: usize,
    pub kind: OutcomeKind,
    pub perturbed_text: String,
    /// Cosine similarity of the perturbed document to the question.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    /// Generator output for the perturbed prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_text: Option<String>,
    pub similarity_to_reference: f64,
    pub raw_delta: f64,
}

impl PerturbationOutcome {
    pub fn retrieval(feature_index: usize, perturbed_text: String, score: f64, reference: f64) -> Self {
        PerturbationOutcome {
            feature_index,
            kind: OutcomeKind::RetrievalScore,
            perturbed_text,
            score: Some(score),
            response_text: None,
            // map [-1, 1] cosine onto [0, 1]
            similarity_to_reference: (1.0 - (reference - score).abs() / 2.0).clamp(0.0, 1.0),
            raw_delta: reference - score,
        }
    }

    pub fn generation(feature_index: usize, perturbed_text: String, response: String, similarity: f64) -> Self {
        PerturbationOutcome {
            feature_index,
            kind: OutcomeKind::GeneratedText,
            perturbed_text,
            score: None,
            response_text: Some(response),
            similarity_to_reference: similarity.clamp(0.0, 1.0),
            raw_delta: 1.0 - similarity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplanationTarget {
    Retrieval,
    Generation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Embedder,
    Generator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub backend_id: String,
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
    pub deterministic: bool,
}

/// A feature together with its importance.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedFeature {
    pub feature: Feature,
    /// Normalized importance in `[0, 1]`.
    pub weight: f64,
    /// Signed change caused by removing the feature.
    pub raw_delta: f64,
    pub outcome: PerturbationOutcome,
}

/// The complete result of explaining one retrieval or one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub target: ExplanationTarget,
    pub source_text: String,
    pub granularity: Granularity,
    pub reference_score: Option<f64>,
    pub reference_response: Option<String>,
    pub features: Vec<AttributedFeature>,
    pub protected_spans: Vec<Span>,
    pub config_fingerprint: String,
    pub backend: BackendDescriptor,
    pub warnings: Vec<String>,
}

impl Explanation {
    pub fn backend_id(&self) -> &str {
        &self.backend.backend_id
    }

    /// Feature indices ordered by weight descending, ties by index ascending.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<&AttributedFeature> = self.features.iter().collect();
        order.sort_by(|a, b| {
            b.weight
                .total_cmp(&a.weight)
                .then(a.feature.index.cmp(&b.feature.index))
        });
        order.into_iter().map(|f| f.feature.index).collect()
    }

    pub fn feature_by_text(&self, text: &str) -> Option<&AttributedFeature> {
        self.features.iter().find(|f| f.feature.text == text)
    }
}

pub const DEGENERATE_REFERENCE: &str = "degenerate_reference";

/// Knobs controlling one explanation run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainerConfig {
    /// `None` selects the target's default (word for retrieval, sentence for generation).
    pub granularity: Option<Granularity>,
    pub strategy_id: String,
    pub comparator_id: String,
    pub parallelism: usize,
    pub top_k_render: Option<usize>,
    pub protect_instruction: bool,
    pub mask_token: String,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            granularity: None,
            strategy_id: "leave_one_out".to_string(),
            comparator_id: "token_f1".to_string(),
            parallelism: 8,
            top_k_render: None,
            protect_instruction: true,
            mask_token: "[MASK]".to_string(),
        }
    }
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.parallelism == 0 {
            return Err(Error::InvalidArgument("parallelism must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_granularity(mut self, granularity: Granularity) -> Self {
        self.granularity = Some(granularity);
        self
    }
}

/// Digest over every config field. Equal configs give equal digests.
pub fn fingerprint(config: &ExplainerConfig) -> String {
    // Struct field order is fixed, so the JSON encoding is canonical.
    let encoded = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&encoded))
}

pub(crate) fn short_digest(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}
