//! Retrieval and generation explainers.
//!
//! Both follow the same four steps: decompose the input into features,
//! perturb it once per feature, push every perturbation through the
//! black-box backend, and compare each outcome with the unperturbed
//! reference. The signed change becomes `raw_delta`; clamped at zero and
//! divided by the largest positive change it becomes the feature weight.

mod compare;

use std::collections::HashMap;
use std::sync::Arc;

use futures::stream::{self, StreamExt, TryStreamExt};

pub use compare::{
    answer_tokens, compare_texts, compare_texts_with, normalize_answer, token_f1, Comparator,
};

use crate::backends::{cosine, CachedEmbedder, CachedGenerator, Embedder, EmbeddingVector, Generator, EMBED_BATCH_SIZE};
use crate::decompose::{clip_to_unprotected, decompose};
use crate::error::{Error, Result};
use crate::perturb::StrategyRegistry;
use crate::rag::RagResult;
use crate::types::{
    fingerprint, AttributedFeature, Document, ExplainerConfig, Explanation, ExplanationTarget,
    Feature, GeneratedResponse, Granularity, PerturbationOutcome, PerturbedInput, Prompt, Question,
    Span, DEGENERATE_REFERENCE,
};

/// Stored and recomputed reference scores may differ by at most this much.
pub const STALE_TOLERANCE: f64 = 1e-6;

/// `max(0, d) / max_j max(0, d_j)`, or all zeros when no delta is positive.
pub fn normalize_weights(raw_deltas: &[f64]) -> Result<Vec<f64>> {
    if raw_deltas.is_empty() {
        return Err(Error::InvalidArgument("no deltas to normalize".into()));
    }
    if raw_deltas.iter().any(|d| !d.is_finite()) {
        return Err(Error::Numeric("raw deltas"));
    }
    let max = raw_deltas.iter().fold(0.0f64, |m, d| m.max(*d));
    if max <= 0.0 {
        return Ok(vec![0.0; raw_deltas.len()]);
    }
    Ok(raw_deltas
        .iter()
        .map(|d| (d.max(0.0) / max).clamp(0.0, 1.0))
        .collect())
}

/// Explain why `document` scored as it did against `question`.
pub async fn explain_retrieval(
    question: &Question,
    document: &Document,
    embedder: Arc<dyn Embedder>,
    config: &ExplainerConfig,
) -> Result<Explanation> {
    explain_retrieval_checked(question, &document.text, embedder, config, None).await
}

/// As [`explain_retrieval`], for free text instead of a corpus document.
pub async fn explain_retrieval_text(
    question: &Question,
    text: &str,
    embedder: Arc<dyn Embedder>,
    config: &ExplainerConfig,
) -> Result<Explanation> {
    explain_retrieval_checked(question, text, embedder, config, None).await
}

async fn explain_retrieval_checked(
    question: &Question,
    text: &str,
    embedder: Arc<dyn Embedder>,
    config: &ExplainerConfig,
    stored_score: Option<f64>,
) -> Result<Explanation> {
    config.validate()?;
    let granularity = config.granularity.unwrap_or(Granularity::Word);
    let features = decompose(text, granularity)?;
    let perturbations = perturb(config, text, &features, &[])?;

    let mut texts: Vec<String> = vec![question.text.clone(), text.to_string()];
    texts.extend(perturbations.iter().map(|p| p.text.clone()));
    let vectors = embed_unique(embedder.as_ref(), texts, config.parallelism).await?;
    let query = &vectors[&question.text];
    let reference = cosine(query, &vectors[text])?;
    if let Some(stored) = stored_score {
        if (stored - reference).abs() > STALE_TOLERANCE {
            return Err(Error::StaleResult {
                stored,
                recomputed: reference,
            });
        }
    }

    let outcomes = perturbations
        .into_iter()
        .map(|p| {
            let score = cosine(query, &vectors[&p.text])?;
            Ok(PerturbationOutcome::retrieval(p.feature_index, p.text, score, reference))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    let weights = if reference <= 0.0 {
        warnings.push(DEGENERATE_REFERENCE.to_string());
        vec![0.0; outcomes.len()]
    } else {
        normalize_weights(&outcomes.iter().map(|o| o.raw_delta).collect::<Vec<_>>())?
    };

    Ok(Explanation {
        target: ExplanationTarget::Retrieval,
        source_text: text.to_string(),
        granularity,
        reference_score: Some(reference),
        reference_response: None,
        features: attribute(&features, outcomes, weights),
        protected_spans: Vec::new(),
        config_fingerprint: fingerprint(&config.clone().with_granularity(granularity)),
        backend: embedder.descriptor(),
        warnings,
    })
}

/// Explain which parts of `prompt` drove the generator's response.
///
/// `reference` reuses an already generated response as y; otherwise the
/// generator is called on the unperturbed prompt first. `comparison_embedder`
/// is only consulted by the `embedding` comparator.
pub async fn explain_generation(
    prompt: &Prompt,
    generator: Arc<dyn Generator>,
    config: &ExplainerConfig,
    reference: Option<&GeneratedResponse>,
    comparison_embedder: Option<Arc<dyn Embedder>>,
) -> Result<Explanation> {
    config.validate()?;
    if Comparator::from_id(&config.comparator_id)? == Comparator::Embedding && comparison_embedder.is_none() {
        return Err(Error::InvalidArgument("the embedding comparator needs an embedder".into()));
    }
    let granularity = config.granularity.unwrap_or(Granularity::Sentence);
    let protected: Vec<Span> = if config.protect_instruction {
        prompt.protected_spans.clone()
    } else {
        Vec::new()
    };
    let source = &prompt.rendered;
    let features = match decompose(source, granularity) {
        Ok(all) => clip_to_unprotected(source, &all, &protected),
        Err(Error::EmptyInput) => Vec::new(),
        Err(e) => return Err(e),
    };
    if features.is_empty() {
        return Err(Error::NoFeatures);
    }
    let perturbations = perturb(config, source, &features, &protected)?;
    if perturbations.is_empty() {
        return Err(Error::NoFeatures);
    }

    let cached = CachedGenerator::new(generator.clone());
    let reference = match reference {
        Some(r) => r.clone(),
        None => cached.generate(source).await?,
    };
    let reference_text = reference.text.as_str();
    let comparator_id = config.comparator_id.as_str();
    let cached = &cached;
    let embedder = comparison_embedder.as_deref();

    let outcomes: Vec<PerturbationOutcome> = stream::iter(perturbations)
        .map(|p| async move {
            let response = cached.generate(&p.text).await?;
            let similarity = compare_texts_with(reference_text, &response.text, comparator_id, embedder).await?;
            Ok::<_, Error>(PerturbationOutcome::generation(p.feature_index, p.text, response.text, similarity))
        })
        .buffered(config.parallelism)
        .try_collect()
        .await?;

    let weights = normalize_weights(&outcomes.iter().map(|o| o.raw_delta).collect::<Vec<_>>())?;
    Ok(Explanation {
        target: ExplanationTarget::Generation,
        source_text: source.clone(),
        granularity,
        reference_score: None,
        reference_response: Some(reference.text.clone()),
        features: attribute(&features, outcomes, weights),
        protected_spans: protected,
        config_fingerprint: fingerprint(&config.clone().with_granularity(granularity)),
        backend: generator.descriptor(),
        warnings: Vec::new(),
    })
}

/// Explanations for every stage of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct RagExplanation {
    /// One per retrieved document, in rank order.
    pub retrieval: Vec<Explanation>,
    pub generation: Explanation,
}

/// Explain each retrieval and the generation of a finished pipeline run,
/// reusing its scores and response as references after re-verifying the scores.
pub async fn explain_rag(
    result: &RagResult,
    embedder: Arc<dyn Embedder>,
    generator: Arc<dyn Generator>,
    config: &ExplainerConfig,
) -> Result<RagExplanation> {
    let embedder: Arc<dyn Embedder> = Arc::new(CachedEmbedder::new(embedder));
    let mut retrieval = Vec::with_capacity(result.retrieved.len());
    for hit in &result.retrieved {
        retrieval.push(
            explain_retrieval_checked(&result.question, &hit.doc.text, embedder.clone(), config, Some(hit.score))
                .await?,
        );
    }
    let generation = explain_generation(
        &result.prompt,
        generator,
        config,
        Some(&result.response),
        Some(embedder),
    )
    .await?;
    Ok(RagExplanation {
        retrieval,
        generation,
    })
}

fn perturb(config: &ExplainerConfig, source: &str, features: &[Feature], protected: &[Span]) -> Result<Vec<PerturbedInput>> {
    StrategyRegistry::with_mask_token(&config.mask_token)
        .get(&config.strategy_id)?
        .perturb(source, features, protected)
}

/// Embed each distinct text once, in batches, with bounded concurrency.
async fn embed_unique(
    embedder: &dyn Embedder,
    texts: Vec<String>,
    parallelism: usize,
) -> Result<HashMap<String, EmbeddingVector>> {
    let mut unique = texts;
    unique.sort();
    unique.dedup();
    let batches: Vec<Vec<String>> = unique.chunks(EMBED_BATCH_SIZE).map(<[String]>::to_vec).collect();
    let embedded: Vec<(Vec<String>, Vec<EmbeddingVector>)> = stream::iter(batches)
        .map(|batch| async move {
            let vectors = embedder.embed(&batch).await?;
            crate::backends::check_batch(&vectors, batch.len())?;
            Ok::<_, Error>((batch, vectors))
        })
        .buffered(parallelism)
        .try_collect()
        .await?;
    let mut out = HashMap::new();
    let mut dimension = None;
    for (batch, vectors) in embedded {
        for (text, v) in batch.into_iter().zip(vectors) {
            match dimension {
                None => dimension = Some(v.dimension()),
                Some(d) if d != v.dimension() => {
                    return Err(Error::BackendProtocol(format!(
                        "embedding dimension changed from {d} to {}",
                        v.dimension()
                    )))
                }
                _ => {}
            }
            out.insert(text, v);
        }
    }
    Ok(out)
}

fn attribute(features: &[Feature], outcomes: Vec<PerturbationOutcome>, weights: Vec<f64>) -> Vec<AttributedFeature> {
    let by_index: HashMap<usize, &Feature> = features.iter().map(|f| (f.index, f)).collect();
    outcomes
        .into_iter()
        .zip(weights)
        .map(|(outcome, weight)| AttributedFeature {
            feature: by_index[&outcome.feature_index].clone(),
            weight,
            raw_delta: outcome.raw_delta,
            outcome,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_weights(&[0.2, -0.05, 0.1]).unwrap(), [1.0, 0.0, 0.5]);
        assert_eq!(normalize_weights(&[0.0, 0.0, 0.0]).unwrap(), [0.0, 0.0, 0.0]);
        assert_eq!(normalize_weights(&[0.3]).unwrap(), [1.0]);
        assert_eq!(normalize_weights(&[-0.3, -0.1]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn normalize_rejects_non_finite() {
        assert!(matches!(normalize_weights(&[0.1, f64::NAN]), Err(Error::Numeric(_))));
        assert!(matches!(normalize_weights(&[f64::INFINITY]), Err(Error::Numeric(_))));
        assert!(normalize_weights(&[]).is_err());
    }
}
