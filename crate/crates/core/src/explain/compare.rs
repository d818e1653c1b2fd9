//! Text comparators used to score a perturbed response against the reference.

use std::collections::HashMap;

use crate::backends::{cosine, Embedder};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    /// 1.0 when the trimmed, lowercased strings are equal.
    Exact,
    TokenF1,
    /// One minus character edit distance over the longer length.
    Levenshtein,
    /// Embedding cosine rescaled from `[-1, 1]` to `[0, 1]`.
    Embedding,
}

impl Comparator {
    pub const IDS: [&'static str; 4] = ["exact", "token_f1", "levenshtein", "embedding"];

    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "exact" => Ok(Comparator::Exact),
            "token_f1" => Ok(Comparator::TokenF1),
            "levenshtein" => Ok(Comparator::Levenshtein),
            "embedding" => Ok(Comparator::Embedding),
            other => Err(Error::UnknownComparator(other.to_string())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Comparator::Exact => "exact",
            Comparator::TokenF1 => "token_f1",
            Comparator::Levenshtein => "levenshtein",
            Comparator::Embedding => "embedding",
        }
    }
}

/// Lowercase, drop punctuation and symbols, split on whitespace.
pub fn answer_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

pub fn normalize_answer(text: &str) -> String {
    answer_tokens(text).join(" ")
}

/// Harmonic mean of token precision and recall over normalized token multisets.
/// Two empty texts score 1.0; exactly one empty text scores 0.0.
pub fn token_f1(reference: &str, candidate: &str) -> f64 {
    let reference = answer_tokens(reference);
    let candidate = answer_tokens(candidate);
    if reference.is_empty() || candidate.is_empty() {
        return if reference.is_empty() && candidate.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &reference {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &candidate {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / candidate.len() as f64;
    let recall = common as f64 / reference.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

fn levenshtein_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.trim().to_lowercase().chars().collect();
    let b: Vec<char> = b.trim().to_lowercase().chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    1.0 - prev[b.len()] as f64 / longest as f64
}

/// Similarity in `[0, 1]` under one of the lexical comparators. The
/// `embedding` comparator needs a backend; use [`compare_texts_with`].
pub fn compare_texts(reference: &str, candidate: &str, comparator_id: &str) -> Result<f64> {
    match Comparator::from_id(comparator_id)? {
        Comparator::Exact => Ok(f64::from(
            reference.trim().to_lowercase() == candidate.trim().to_lowercase(),
        )),
        Comparator::TokenF1 => Ok(token_f1(reference, candidate)),
        Comparator::Levenshtein => Ok(levenshtein_similarity(reference, candidate)),
        Comparator::Embedding => Err(Error::InvalidArgument(
            "the embedding comparator needs an embedder".into(),
        )),
    }
}

pub async fn compare_texts_with(
    reference: &str,
    candidate: &str,
    comparator_id: &str,
    embedder: Option<&dyn Embedder>,
) -> Result<f64> {
    match (Comparator::from_id(comparator_id)?, embedder) {
        (Comparator::Embedding, Some(embedder)) => {
            let v = embedder.embed(&[reference.to_string(), candidate.to_string()]).await?;
            Ok(((cosine(&v[0], &v[1])? + 1.0) / 2.0).clamp(0.0, 1.0))
        }
        _ => compare_texts(reference, candidate, comparator_id),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::LexicalEmbedder;

    #[test]
    fn token_f1_partial_overlap() {
        // P = 3/3, R = 3/4 -> F1 = 6/7
        let f = compare_texts("the sky is blue", "sky is blue", "token_f1").unwrap();
        assert!((f - 6.0 / 7.0).abs() < 1e-12);
        assert!((f - 0.857143).abs() < 1e-6);
    }

    #[test]
    fn token_f1_empty_cases() {
        assert_eq!(token_f1("something", ""), 0.0);
        assert_eq!(token_f1("", ""), 1.0);
    }

    #[test]
    fn token_f1_is_multiset_based() {
        assert_eq!(token_f1("a a b", "b a a"), 1.0);
        assert!(token_f1("a a b", "a b") < 1.0);
    }

    #[test]
    fn exact_normalizes_case_and_whitespace() {
        assert_eq!(compare_texts("a", "a", "exact").unwrap(), 1.0);
        assert_eq!(compare_texts("a", "a ", "exact").unwrap(), 1.0);
        assert_eq!(compare_texts("A", "a", "exact").unwrap(), 1.0);
        assert_eq!(compare_texts("a", "b", "exact").unwrap(), 0.0);
    }

    #[test]
    fn levenshtein_similarity_values() {
        assert_eq!(compare_texts("kitten", "sitting", "levenshtein").unwrap(), 1.0 - 3.0 / 7.0);
        assert_eq!(compare_texts("", "", "levenshtein").unwrap(), 1.0);
        assert_eq!(compare_texts("abc", "", "levenshtein").unwrap(), 0.0);
    }

    #[test]
    fn unknown_comparator() {
        assert!(matches!(compare_texts("a", "b", "bleu"), Err(Error::UnknownComparator(_))));
    }

    #[tokio::test]
    async fn embedding_comparator_rescales_cosine() {
        let e = LexicalEmbedder::from_texts(["red green blue"]).unwrap();
        let same = compare_texts_with("red", "red", "embedding", Some(&e)).await.unwrap();
        let orthogonal = compare_texts_with("red", "green", "embedding", Some(&e)).await.unwrap();
        assert!((same - 1.0).abs() < 1e-12);
        assert!((orthogonal - 0.5).abs() < 1e-12);
        assert!(compare_texts_with("red", "red", "embedding", None).await.is_err());
    }
}
