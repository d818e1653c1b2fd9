//! Split inputs into span-annotated word or sentence features.
//!
//! Both splitters are rule based. Words are maximal runs of non-whitespace
//! characters with punctuation kept attached. Sentences end after `.`, `!`
//! or `?` when followed by whitespace, and at every newline. There is no
//! abbreviation list, so "Dr. Smith" splits after "Dr.".

use crate::error::{Error, Result};
use crate::types::{Feature, Granularity, Span};

/// Pluggable splitting rule.
pub trait Splitter: Send + Sync {
    fn granularity(&self) -> Granularity;
    fn split(&self, text: &str) -> Result<Vec<Feature>>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct WordSplitter;

#[derive(Debug, Default, Clone, Copy)]
pub struct SentenceSplitter;

impl Splitter for WordSplitter {
    fn granularity(&self) -> Granularity {
        Granularity::Word
    }

    fn split(&self, text: &str) -> Result<Vec<Feature>> {
        decompose_words(text)
    }
}

impl Splitter for SentenceSplitter {
    fn granularity(&self) -> Granularity {
        Granularity::Sentence
    }

    fn split(&self, text: &str) -> Result<Vec<Feature>> {
        decompose_sentences(text)
    }
}

pub fn decompose(text: &str, granularity: Granularity) -> Result<Vec<Feature>> {
    match granularity {
        Granularity::Word => decompose_words(text),
        Granularity::Sentence => decompose_sentences(text),
    }
}

pub fn decompose_words(text: &str) -> Result<Vec<Feature>> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut features = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    for (idx, ch) in text.chars().enumerate() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                push_feature(&mut features, &mut current, start, idx, Granularity::Word);
            }
        } else {
            if current.is_empty() {
                start = idx;
            }
            current.push(ch);
        }
    }
    if !current.is_empty() {
        let end = start + current.chars().count();
        push_feature(&mut features, &mut current, start, end, Granularity::Word);
    }
    Ok(features)
}

pub fn decompose_sentences(text: &str) -> Result<Vec<Feature>> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let chars: Vec<char> = text.chars().collect();
    let mut features = Vec::new();
    let mut seg_start = 0;
    for i in 0..chars.len() {
        let boundary_after = match chars[i] {
            '\n' => Some(i),
            '.' | '!' | '?' if chars.get(i + 1).is_some_and(|c| c.is_whitespace()) => Some(i + 1),
            _ => None,
        };
        if let Some(seg_end) = boundary_after {
            emit_trimmed(&chars, seg_start, seg_end, &mut features);
            seg_start = seg_end;
        }
    }
    emit_trimmed(&chars, seg_start, chars.len(), &mut features);
    Ok(features)
}

fn emit_trimmed(chars: &[char], mut start: usize, mut end: usize, out: &mut Vec<Feature>) {
    while start < end && chars[start].is_whitespace() {
        start += 1;
    }
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    if start < end {
        out.push(Feature {
            index: out.len(),
            text: chars[start..end].iter().collect(),
            span: Span::new(start, end),
            granularity: Granularity::Sentence,
        });
    }
}

fn push_feature(
    out: &mut Vec<Feature>,
    current: &mut String,
    start: usize,
    end: usize,
    granularity: Granularity,
) {
    out.push(Feature {
        index: out.len(),
        text: std::mem::take(current),
        span: Span::new(start, end),
        granularity,
    });
}

/// Remove protected regions from each feature, splitting where a protected
/// span falls inside a feature. Pieces that are blank after trimming are
/// dropped and the surviving features are re-indexed from zero.
pub fn clip_to_unprotected(source: &str, features: &[Feature], protected: &[Span]) -> Vec<Feature> {
    let chars: Vec<char> = source.chars().collect();
    let mut out: Vec<Feature> = Vec::new();
    for feature in features {
        let mut pieces = vec![feature.span];
        for guard in protected {
            pieces = pieces
                .into_iter()
                .flat_map(|piece| subtract(piece, *guard))
                .collect();
        }
        for piece in pieces {
            let (mut start, mut end) = (piece.start, piece.end.min(chars.len()));
            while start < end && chars[start].is_whitespace() {
                start += 1;
            }
            while end > start && chars[end - 1].is_whitespace() {
                end -= 1;
            }
            if start < end {
                out.push(Feature {
                    index: out.len(),
                    text: chars[start..end].iter().collect(),
                    span: Span::new(start, end),
                    granularity: feature.granularity,
                });
            }
        }
    }
    out
}

fn subtract(piece: Span, guard: Span) -> Vec<Span> {
    if !piece.intersects(&guard) {
        return vec![piece];
    }
    let mut rest = Vec::with_capacity(2);
    if piece.start < guard.start {
        rest.push(Span::new(piece.start, guard.start));
    }
    if guard.end < piece.end {
        rest.push(Span::new(guard.end, piece.end));
    }
    rest
}
