//! Perturbation strategies: build one perturbed input per unprotected feature.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::types::{Feature, PerturbedInput, Span};

pub const LEAVE_ONE_OUT: &str = "leave_one_out";
pub const MASK: &str = "mask";
pub const DEFAULT_MASK_TOKEN: &str = "[MASK]";

pub trait PerturbationStrategy: Send + Sync {
    fn id(&self) -> &str;
    fn description(&self) -> &str;
    fn perturb(
        &self,
        source: &str,
        features: &[Feature],
        protected: &[Span],
    ) -> Result<Vec<PerturbedInput>>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct LeaveOneOut;

#[derive(Debug, Clone)]
pub struct Mask {
    pub token: String,
}

impl Default for Mask {
    fn default() -> Self {
        Mask {
            token: DEFAULT_MASK_TOKEN.to_string(),
        }
    }
}

impl PerturbationStrategy for LeaveOneOut {
    fn id(&self) -> &str {
        LEAVE_ONE_OUT
    }

    fn description(&self) -> &str {
        "remove each feature in turn and collapse the whitespace left behind"
    }

    fn perturb(&self, source: &str, features: &[Feature], protected: &[Span]) -> Result<Vec<PerturbedInput>> {
        leave_one_out(source, features, protected)
    }
}

impl PerturbationStrategy for Mask {
    fn id(&self) -> &str {
        MASK
    }

    fn description(&self) -> &str {
        "replace each feature in turn with a mask token"
    }

    fn perturb(&self, source: &str, features: &[Feature], protected: &[Span]) -> Result<Vec<PerturbedInput>> {
        mask_feature(source, features, protected, &self.token)
    }
}

pub fn leave_one_out(source: &str, features: &[Feature], protected: &[Span]) -> Result<Vec<PerturbedInput>> {
    perturb_each(source, features, protected, LEAVE_ONE_OUT, |chars, span| {
        remove_span(chars, span)
    })
}

/// Like [`leave_one_out`] but substitutes `mask_token` for the feature.
/// An empty token degenerates to leave-one-out exactly.
pub fn mask_feature(
    source: &str,
    features: &[Feature],
    protected: &[Span],
    mask_token: &str,
) -> Result<Vec<PerturbedInput>> {
    if mask_token.is_empty() {
        return perturb_each(source, features, protected, MASK, remove_span);
    }
    perturb_each(source, features, protected, MASK, |chars, span| {
        let mut out: String = chars[..span.start].iter().collect();
        out.push_str(mask_token);
        out.extend(&chars[span.end..]);
        out.trim().to_string()
    })
}

fn perturb_each(
    source: &str,
    features: &[Feature],
    protected: &[Span],
    strategy_id: &str,
    apply: impl Fn(&[char], Span) -> String,
) -> Result<Vec<PerturbedInput>> {
    if features.is_empty() {
        return Err(Error::NoFeatures);
    }
    let chars: Vec<char> = source.chars().collect();
    Ok(features
        .iter()
        .filter(|f| !protected.iter().any(|p| p.intersects(&f.span)))
        .map(|f| PerturbedInput {
            feature_index: f.index,
            text: apply(&chars, f.span),
            strategy_id: strategy_id.to_string(),
        })
        .collect())
}

/// Cut `span` out of `chars`. When whitespace sits on both sides of the cut
/// the two runs merge into one separator: a newline if either run held one,
/// otherwise a single space. The result is trimmed.
fn remove_span(chars: &[char], span: Span) -> String {
    let left = &chars[..span.start];
    let right = &chars[span.end.min(chars.len())..];
    let lw = left.iter().rev().take_while(|c| c.is_whitespace()).count();
    let rw = right.iter().take_while(|c| c.is_whitespace()).count();
    let mut out = String::with_capacity(chars.len());
    if lw > 0 && rw > 0 {
        let run = left[left.len() - lw..].iter().chain(&right[..rw]);
        let sep = if run.clone().any(|&c| c == '\n') { '\n' } else { ' ' };
        out.extend(&left[..left.len() - lw]);
        out.push(sep);
        out.extend(&right[rw..]);
    } else {
        out.extend(left);
        out.extend(right);
    }
    out.trim().to_string()
}

/// Registry of strategies keyed by id.
#[derive(Clone)]
pub struct StrategyRegistry {
    strategies: BTreeMap<String, Arc<dyn PerturbationStrategy>>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_mask_token(DEFAULT_MASK_TOKEN)
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry {
            strategies: BTreeMap::new(),
        }
    }

    pub fn with_mask_token(token: &str) -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(LeaveOneOut));
        reg.register(Arc::new(Mask {
            token: token.to_string(),
        }));
        reg
    }

    pub fn register(&mut self, strategy: Arc<dyn PerturbationStrategy>) {
        self.strategies.insert(strategy.id().to_string(), strategy);
    }

    /// Look up a strategy; `loo` is accepted as shorthand for leave-one-out.
    pub fn get(&self, id: &str) -> Result<Arc<dyn PerturbationStrategy>> {
        let id = if id == "loo" { LEAVE_ONE_OUT } else { id };
        self.strategies
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy(id.to_string()))
    }

    pub fn list(&self) -> Vec<(String, String)> {
        self.strategies
            .values()
            .map(|s| (s.id().to_string(), s.description().to_string()))
            .collect()
    }
}

pub fn list_strategies() -> Vec<(String, String)> {
    StrategyRegistry::default().list()
}
