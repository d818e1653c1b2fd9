//! Scoring explanations against human annotations.
//!
//! Annotations mark character regions a person judged significant. A
//! feature counts as annotated when its span overlaps any marked region.
//! The explainer's prediction is its `k` heaviest features, with `k`
//! defaulting to the number of annotated features so that completeness and
//! recall are comparable across cases.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::backends::{EmbedderProvider, Generator};
use crate::error::{Error, Result};
use crate::explain::{explain_generation, explain_retrieval_text, normalize_answer, token_f1};
use crate::types::{ExplainerConfig, Explanation, ExplanationTarget, Prompt, Question, Span};

/// One line of an annotations JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub case_id: String,
    pub target: ExplanationTarget,
    /// The document (retrieval) or rendered prompt (generation).
    pub source_text: String,
    pub annotated_spans: Vec<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
    /// Required for retrieval cases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    /// Regions of a generation prompt excluded from perturbation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub protected_spans: Vec<Span>,
}

impl AnnotationRecord {
    pub fn validate(&self) -> Result<()> {
        let len = self.source_text.chars().count();
        let mut spans = self.annotated_spans.clone();
        spans.sort();
        for s in &spans {
            if s.start > s.end || s.end > len {
                return Err(Error::InvalidArgument(format!("annotated span {s} out of bounds")));
            }
        }
        if spans.windows(2).any(|w| w[0].intersects(&w[1])) {
            return Err(Error::InvalidArgument("annotated spans overlap".into()));
        }
        Ok(())
    }
}

pub fn read_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Ingest {
                path: path.to_path_buf(),
                reason: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

/// Fraction of annotated features found among the predicted top-k.
pub fn completeness(annotated: &BTreeSet<usize>, predicted_topk: &[usize]) -> Result<f64> {
    if annotated.is_empty() {
        return Err(Error::UndefinedMetric("completeness needs at least one annotated feature".into()));
    }
    let predicted: BTreeSet<usize> = predicted_topk.iter().copied().collect();
    Ok(annotated.intersection(&predicted).count() as f64 / annotated.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn prf1(annotated: &BTreeSet<usize>, predicted: &BTreeSet<usize>) -> Result<Prf1> {
    if annotated.is_empty() {
        return Err(Error::UndefinedMetric("precision/recall need annotated features".into()));
    }
    let hit = annotated.intersection(predicted).count() as f64;
    let precision = if predicted.is_empty() { 0.0 } else { hit / predicted.len() as f64 };
    let recall = hit / annotated.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Prf1 { precision, recall, f1 })
}

/// Map annotated spans to feature indices and pick the `k` heaviest
/// features, ties going to the lower index.
pub fn match_features(
    explanation: &Explanation,
    source_text: &str,
    annotated_spans: &[Span],
    k: Option<usize>,
) -> Result<(BTreeSet<usize>, Vec<usize>)> {
    if explanation.source_text != source_text {
        return Err(Error::AnnotationMismatch);
    }
    let annotated: BTreeSet<usize> = explanation
        .features
        .iter()
        .filter(|f| annotated_spans.iter().any(|s| s.intersects(&f.feature.span)))
        .map(|f| f.feature.index)
        .collect();
    let k = k.unwrap_or(annotated.len());
    let predicted = explanation.ranking().into_iter().take(k).collect();
    Ok((annotated, predicted))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnswerCorrectness {
    pub exact_match: u8,
    pub token_f1: f64,
}

pub fn answer_correctness(predicted: &str, gold: &str) -> AnswerCorrectness {
    AnswerCorrectness {
        exact_match: u8::from(normalize_answer(predicted) == normalize_answer(gold)),
        token_f1: if predicted.trim().is_empty() { 0.0 } else { token_f1(gold, predicted) },
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn correlate(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::UndefinedMetric(format!("length mismatch {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::UndefinedMetric("correlation needs at least 3 pairs".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("correlation input"));
    }
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::UndefinedMetric("zero variance".into()));
    }
    Ok((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share their mean
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub case_id: String,
    pub target: ExplanationTarget,
    pub annotated: Vec<usize>,
    pub predicted: Vec<usize>,
    pub completeness: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<AnswerCorrectness>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseFailure {
    pub case_id: String,
    pub code: String,
    pub message: String,
}

/// Per-case metrics and their means over the successful cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cases: Vec<CaseMetrics>,
    pub failures: Vec<CaseFailure>,
    pub case_count: usize,
    pub completeness_mean: Option<f64>,
    pub precision_mean: Option<f64>,
    pub recall_mean: Option<f64>,
    pub f1_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_exact_match_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_f1_mean: Option<f64>,
    /// Spearman correlation of explanation F1 with answer token F1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_note: Option<String>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl EvalReport {
    pub fn from_cases(mut cases: Vec<CaseMetrics>, mut failures: Vec<CaseFailure>) -> Self {
        cases.sort_by(|a, b| a.case_id.cmp(&b.case_id));
        failures.sort_by(|a, b| a.case_id.cmp(&b.case_id));
        let answered: Vec<&CaseMetrics> = cases.iter().filter(|c| c.answer.is_some()).collect();
        let (correlation, correlation_note) = if answered.is_empty() {
            (None, None)
        } else {
            let xs: Vec<f64> = answered.iter().map(|c| c.f1).collect();
            let ys: Vec<f64> = answered.iter().map(|c| c.answer.expect("filtered").token_f1).collect();
            match correlate(&xs, &ys) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            }
        };
        EvalReport {
            case_count: cases.len(),
            completeness_mean: mean(cases.iter().map(|c| c.completeness)),
            precision_mean: mean(cases.iter().map(|c| c.precision)),
            recall_mean: mean(cases.iter().map(|c| c.recall)),
            f1_mean: mean(cases.iter().map(|c| c.f1)),
            answer_exact_match_mean: mean(answered.iter().map(|c| f64::from(c.answer.expect("filtered").exact_match))),
            answer_f1_mean: mean(answered.iter().map(|c| c.answer.expect("filtered").token_f1)),
            correlation,
            correlation_note,
            cases,
            failures,
        }
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:<10} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "case", "target", "compl", "prec", "recall", "f1", "ans_f1"
        );
        for c in &self.cases {
            let target = match c.target {
                ExplanationTarget::Retrieval => "retrieval",
                ExplanationTarget::Generation => "generation",
            };
            let ans = c.answer.map(|a| format!("{:.4}", a.token_f1)).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<16} {:<10} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8}",
                c.case_id, target, c.completeness, c.precision, c.recall, c.f1, ans
            );
        }
        let fmt = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<16} {:<10} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "mean",
            format!("n={}", self.case_count),
            fmt(self.completeness_mean),
            fmt(self.precision_mean),
            fmt(self.recall_mean),
            fmt(self.f1_mean),
            fmt(self.answer_f1_mean)
        );
        let _ = writeln!(out, "spearman: {}", fmt(self.correlation));
        for f in &self.failures {
            let _ = writeln!(out, "failed {}: {} ({})", f.case_id, f.message, f.code);
        }
        out
    }
}

/// Explain one annotated case and score it.
pub async fn evaluate_case(
    record: &AnnotationRecord,
    config: &ExplainerConfig,
    embedders: &dyn EmbedderProvider,
    generator: Arc<dyn Generator>,
) -> Result<CaseMetrics> {
    record.validate()?;
    let (explanation, response) = match record.target {
        ExplanationTarget::Retrieval => {
            let question = record
                .question
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument("retrieval case needs a question".into()))?;
            let question = Question::new(record.case_id.clone(), question)?;
            let embedder = embedders.embedder_for(&[&question.text, &record.source_text])?;
            (explain_retrieval_text(&question, &record.source_text, embedder, config).await?, None)
        }
        ExplanationTarget::Generation => {
            let mut prompt = Prompt::raw(record.source_text.clone());
            prompt.protected_spans = record.protected_spans.clone();
            let e = explain_generation(&prompt, generator, config, None, None).await?;
            let response = e.reference_response.clone();
            (e, response)
        }
    };
    let (annotated, predicted) = match_features(&explanation, &record.source_text, &record.annotated_spans, None)?;
    let complete = completeness(&annotated, &predicted)?;
    let scores = prf1(&annotated, &predicted.iter().copied().collect())?;
    let answer = match (&record.gold_answer, &response) {
        (Some(gold), Some(resp)) => Some(answer_correctness(resp, gold)),
        _ => None,
    };
    Ok(CaseMetrics {
        case_id: record.case_id.clone(),
        target: record.target,
        annotated: annotated.into_iter().collect(),
        predicted,
        completeness: complete,
        precision: scores.precision,
        recall: scores.recall,
        f1: scores.f1,
        response,
        answer,
    })
}

/// Evaluate every record in an annotations file. Failing cases are
/// reported and excluded from the aggregates.
pub async fn run_eval(
    annotations_path: &Path,
    config: &ExplainerConfig,
    embedders: &dyn EmbedderProvider,
    generator: Arc<dyn Generator>,
) -> Result<EvalReport> {
    let records = read_annotations(annotations_path)?;
    Ok(evaluate_records(&records, config, embedders, generator).await)
}

pub async fn evaluate_records(
    records: &[AnnotationRecord],
    config: &ExplainerConfig,
    embedders: &dyn EmbedderProvider,
    generator: Arc<dyn Generator>,
) -> EvalReport {
    let results: Vec<(String, Result<CaseMetrics>)> = stream::iter(records)
        .map(|r| {
            let generator = generator.clone();
            async move { (r.case_id.clone(), evaluate_case(r, config, embedders, generator).await) }
        })
        .buffer_unordered(config.parallelism.max(1))
        .collect()
        .await;
    let mut cases = Vec::new();
    let mut failures = Vec::new();
    for (case_id, result) in results {
        match result {
            Ok(m) => cases.push(m),
            Err(e) => failures.push(CaseFailure {
                case_id,
                code: e.code().to_string(),
                message: e.to_string(),
            }),
        }
    }
    EvalReport::from_cases(cases, failures)
}
