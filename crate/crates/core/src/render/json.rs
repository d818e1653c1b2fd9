use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::types::{
    AttributedFeature, BackendDescriptor, Explanation, ExplanationTarget, Feature, Granularity,
    PerturbationOutcome, Span,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ExplanationDoc {
    schema_version: u32,
    target: ExplanationTarget,
    source_text: String,
    granularity: Granularity,
    reference: Reference,
    backend: BackendDescriptor,
    config_fingerprint: String,
    #[serde(default)]
    protected_spans: Vec<Span>,
    #[serde(default)]
    warnings: Vec<String>,
    features: Vec<FeatureDoc>,
}

#[derive(Serialize, Deserialize)]
struct Reference {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    response: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct FeatureDoc {
    index: usize,
    text: String,
    span: Span,
    weight: f64,
    raw_delta: f64,
    outcome: PerturbationOutcome,
}

impl From<&Explanation> for ExplanationDoc {
    fn from(e: &Explanation) -> Self {
        ExplanationDoc {
            schema_version: SCHEMA_VERSION,
            target: e.target,
            source_text: e.source_text.clone(),
            granularity: e.granularity,
            reference: Reference {
                score: e.reference_score,
                response: e.reference_response.clone(),
            },
            backend: e.backend.clone(),
            config_fingerprint: e.config_fingerprint.clone(),
            protected_spans: e.protected_spans.clone(),
            warnings: e.warnings.clone(),
            features: e
                .features
                .iter()
                .map(|f| FeatureDoc {
                    index: f.feature.index,
                    text: f.feature.text.clone(),
                    span: f.feature.span,
                    weight: f.weight,
                    raw_delta: f.raw_delta,
                    outcome: f.outcome.clone(),
                })
                .collect(),
        }
    }
}

impl From<ExplanationDoc> for Explanation {
    fn from(doc: ExplanationDoc) -> Self {
        let granularity = doc.granularity;
        Explanation {
            target: doc.target,
            source_text: doc.source_text,
            granularity,
            reference_score: doc.reference.score,
            reference_response: doc.reference.response,
            features: doc
                .features
                .into_iter()
                .map(|f| AttributedFeature {
                    feature: Feature {
                        index: f.index,
                        text: f.text,
                        span: f.span,
                        granularity,
                    },
                    weight: f.weight,
                    raw_delta: f.raw_delta,
                    outcome: f.outcome,
                })
                .collect(),
            protected_spans: doc.protected_spans,
            config_fingerprint: doc.config_fingerprint,
            backend: doc.backend,
            warnings: doc.warnings,
        }
    }
}

/// Canonical JSON: sorted keys, floats at 9 significant digits, no
/// insignificant whitespace, trailing newline.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&value, &mut out);
    out.push('\n');
    Ok(out)
}

pub fn to_canonical_json(explanation: &Explanation) -> String {
    canonical_json(&ExplanationDoc::from(explanation)).expect("explanation serializes")
}

pub fn explanation_from_json(text: &str) -> Result<Explanation> {
    let doc: ExplanationDoc = serde_json::from_str(text)?;
    Ok(doc.into())
}

/// Content digest of the canonical form.
pub fn explanation_id(explanation: &Explanation) -> String {
    hex::encode(Sha256::digest(to_canonical_json(explanation).as_bytes()))
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => out.push_str(&u.to_string()),
            (None, Some(i)) => out.push_str(&i.to_string()),
            _ => out.push_str(&format_float(n.as_f64().expect("finite number"))),
        },
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("key serializes"));
                out.push(':');
                write_value(&map[key], out);
            }
            out.push('}');
        }
    }
}

fn format_float(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().expect("scientific notation parses");
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    let mut s = format!("{rounded}");
    if !s.contains(['.', 'e', 'E']) {
        s.push_str(".0");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_get_nine_significant_digits() {
        assert_eq!(format_float(0.6708203932499369), "0.670820393");
        assert_eq!(format_float(1.0), "1.0");
        assert_eq!(format_float(-0.0), "0.0");
        assert_eq!(format_float(1.0 / 3.0), "0.333333333");
        assert_eq!(format_float(-0.154420364), "-0.154420364");
    }

    #[test]
    fn keys_are_sorted_and_compact() {
        let v = serde_json::json!({"b": 1, "a": [0.5, "x"], "c": {"z": null, "y": true}});
        assert_eq!(canonical_json(&v).unwrap(), "{\"a\":[0.5,\"x\"],\"b\":1,\"c\":{\"y\":true,\"z\":null}}\n");
    }
}
