use crate::error::{Error, Result};
use crate::types::{char_len, Document, Prompt, Span};

pub const DEFAULT_TEMPLATE: &str = "Answer using the context.\nContext: {context}\nQuestion: {question}";

const CONTEXT: &str = "{context}";
const QUESTION: &str = "{question}";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Context,
    Question,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Literal(String),
    Slot(Slot),
}

/// Prompt template with exactly one `{context}` and one `{question}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
    pieces: Vec<Piece>,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate::new(DEFAULT_TEMPLATE).expect("default template is valid")
    }
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        for slot in [CONTEXT, QUESTION] {
            match text.matches(slot).count() {
                1 => {}
                0 => return Err(Error::Template(format!("missing {slot} placeholder"))),
                _ => return Err(Error::Template(format!("repeated {slot} placeholder"))),
            }
        }
        let mut pieces = Vec::new();
        let mut rest = text.as_str();
        while !rest.is_empty() {
            let next = [(CONTEXT, Slot::Context), (QUESTION, Slot::Question)]
                .into_iter()
                .filter_map(|(pat, slot)| rest.find(pat).map(|at| (at, pat, slot)))
                .min_by_key(|(at, _, _)| *at);
            match next {
                Some((at, pat, slot)) => {
                    if at > 0 {
                        pieces.push(Piece::Literal(rest[..at].to_string()));
                    }
                    pieces.push(Piece::Slot(slot));
                    rest = &rest[at + pat.len()..];
                }
                None => {
                    pieces.push(Piece::Literal(rest.to_string()));
                    rest = "";
                }
            }
        }
        Ok(PromptTemplate { text, pieces })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Render `template` with `docs` joined by newlines as the context.
///
/// With `protect_instruction`, every literal part of the template (the
/// instruction and the labels) becomes a protected span.
pub fn compose_prompt(
    template: &PromptTemplate,
    question: &str,
    docs: &[Document],
    protect_instruction: bool,
) -> Result<Prompt> {
    let context = docs.iter().map(|d| d.text.as_str()).collect::<Vec<_>>().join("\n");
    let mut rendered = String::new();
    let mut offset = 0;
    let mut protected_spans = Vec::new();
    for piece in &template.pieces {
        let text = match piece {
            Piece::Literal(lit) => {
                if protect_instruction {
                    protected_spans.push(Span::new(offset, offset + char_len(lit)));
                }
                lit.as_str()
            }
            Piece::Slot(Slot::Context) => context.as_str(),
            Piece::Slot(Slot::Question) => question,
        };
        rendered.push_str(text);
        offset += char_len(text);
    }
    Ok(Prompt {
        instruction: template.text.clone(),
        context_blocks: docs.iter().map(|d| (d.id.clone(), d.text.clone())).collect(),
        question_text: question.to_string(),
        rendered,
        protected_spans,
        empty_context: docs.is_empty(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::char_slice;

    #[test]
    fn renders_default_template() {
        let docs = [Document::new("d", "D.").unwrap()];
        let p = compose_prompt(&PromptTemplate::default(), "Q?", &docs, true).unwrap();
        assert_eq!(p.rendered, "Answer using the context.\nContext: D.\nQuestion: Q?");
        assert_eq!(p.context_blocks, vec![("d".to_string(), "D.".to_string())]);
        assert!(!p.empty_context);
    }

    #[test]
    fn protected_spans_cover_literals() {
        let docs = [Document::new("d", "D.").unwrap()];
        let p = compose_prompt(&PromptTemplate::default(), "Q?", &docs, true).unwrap();
        let covered: Vec<&str> = p.protected_spans.iter().map(|s| char_slice(&p.rendered, *s)).collect();
        assert_eq!(covered, ["Answer using the context.\nContext: ", "\nQuestion: "]);
        let open = compose_prompt(&PromptTemplate::default(), "Q?", &docs, false).unwrap();
        assert!(open.protected_spans.is_empty());
        assert_eq!(open.rendered, p.rendered);
    }

    #[test]
    fn empty_context_sets_flag() {
        let p = compose_prompt(&PromptTemplate::default(), "Q?", &[], true).unwrap();
        assert!(p.empty_context);
        assert_eq!(p.rendered, "Answer using the context.\nContext: \nQuestion: Q?");
    }

    #[test]
    fn malformed_templates_rejected() {
        assert!(matches!(PromptTemplate::new("no slots"), Err(Error::Template(_))));
        assert!(matches!(PromptTemplate::new("{context}"), Err(Error::Template(_))));
        assert!(matches!(
            PromptTemplate::new("{context}{question}{context}"),
            Err(Error::Template(_))
        ));
        assert!(PromptTemplate::new("{question} then {context}").is_ok());
    }
}
