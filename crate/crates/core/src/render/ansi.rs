use crate::types::{char_slice, Explanation, Span};

pub const RESET: &str = "\x1b[0m";

/// SGR prefix for a weight, `None` below 0.2.
pub fn ansi_bucket(weight: f64) -> Option<&'static str> {
    match weight {
        w if w < 0.2 => None,
        w if w < 0.4 => Some("\x1b[2;33m"),
        w if w < 0.6 => Some("\x1b[33m"),
        w if w < 0.8 => Some("\x1b[93m"),
        _ => Some("\x1b[41m"),
    }
}

/// Source text with feature spans wrapped in SGR codes by weight bucket.
/// Only the `top_k` heaviest features are styled when `top_k` is set.
pub fn render_ansi(explanation: &Explanation, top_k: Option<usize>) -> String {
    let styled = super::styled_indices(explanation, top_k);
    let source = &explanation.source_text;
    let total = source.chars().count();
    let mut features: Vec<_> = explanation.features.iter().collect();
    features.sort_by_key(|f| f.feature.span.start);

    let mut out = String::with_capacity(source.len() + 16 * features.len());
    let mut cursor = 0;
    for f in features {
        let span = f.feature.span;
        out.push_str(char_slice(source, Span::new(cursor, span.start)));
        let text = char_slice(source, span);
        match ansi_bucket(f.weight).filter(|_| styled.contains(&f.feature.index)) {
            Some(code) => {
                out.push_str(code);
                out.push_str(text);
                out.push_str(RESET);
            }
            None => out.push_str(text),
        }
        cursor = span.end;
    }
    out.push_str(char_slice(source, Span::new(cursor, total)));
    out
}

/// Remove SGR escape sequences.
pub fn strip_ansi(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c == '\x1b' {
            for c in chars.by_ref() {
                if c == 'm' {
                    break;
                }
            }
        } else {
            out.push(c);
        }
    }
    out
}
