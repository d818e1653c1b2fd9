use async_trait::async_trait;

use super::Generator;
use crate::decompose::decompose_sentences;
use crate::error::Result;
use crate::explain::token_f1;
use crate::types::{short_digest, BackendDescriptor, BackendKind, GeneratedResponse};

pub const MOCK_BACKEND_ID: &str = "mock-extractive";

/// Deterministic extractive "generator".
///
/// It reads the question after the last `question_label` and the context
/// between `context_label` and that question, then answers with the context
/// sentence of highest token F1 against the question. Ties go to the
/// earliest sentence.
#[derive(Debug, Clone)]
pub struct ExtractiveMockGenerator {
    pub context_label: String,
    pub question_label: String,
}

impl Default for ExtractiveMockGenerator {
    fn default() -> Self {
        ExtractiveMockGenerator {
            context_label: "Context:".to_string(),
            question_label: "Question:".to_string(),
        }
    }
}

impl ExtractiveMockGenerator {
    pub fn answer(&self, prompt: &str) -> String {
        let (before, question) = match prompt.rfind(&self.question_label) {
            Some(at) => (&prompt[..at], &prompt[at + self.question_label.len()..]),
            None => (prompt, ""),
        };
        let context = match before.find(&self.context_label) {
            Some(at) => &before[at + self.context_label.len()..],
            None => before,
        };
        let Ok(sentences) = decompose_sentences(context) else {
            return String::new();
        };
        let mut best: Option<(f64, &str)> = None;
        for sentence in &sentences {
            let score = token_f1(&sentence.text, question);
            if best.is_none_or(|(top, _)| score > top) {
                best = Some((score, sentence.text.as_str()));
            }
        }
        best.map(|(_, s)| s.to_string()).unwrap_or_default()
    }

    fn settings_fingerprint(&self) -> String {
        short_digest(format!("{MOCK_BACKEND_ID}|{}|{}", self.context_label, self.question_label).as_bytes())
    }
}

#[async_trait]
impl Generator for ExtractiveMockGenerator {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            backend_id: MOCK_BACKEND_ID.to_string(),
            kind: BackendKind::Generator,
            endpoint: None,
            model_name: Some("max-overlap-sentence".to_string()),
            deterministic: true,
        }
    }

    async fn generate(&self, prompt: &str) -> Result<GeneratedResponse> {
        Ok(GeneratedResponse {
            text: self.answer(prompt),
            backend_id: MOCK_BACKEND_ID.to_string(),
            settings_fingerprint: self.settings_fingerprint(),
        })
    }
}
