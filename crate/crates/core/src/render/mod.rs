//! Canonical JSON plus terminal and HTML heatmaps.

mod ansi;
mod html;
mod json;

pub use ansi::{ansi_bucket, render_ansi, strip_ansi, RESET};
pub use html::{html_escape, render_html, weight_color};
pub use json::{canonical_json, explanation_from_json, explanation_id, to_canonical_json, SCHEMA_VERSION};

use crate::types::Explanation;

/// Feature indices that receive styling: all of them, or the `top_k` heaviest.
pub(crate) fn styled_indices(explanation: &Explanation, top_k: Option<usize>) -> Vec<usize> {
    let ranking = explanation.ranking();
    match top_k {
        Some(k) => ranking.into_iter().take(k).collect(),
        None => ranking,
    }
}
