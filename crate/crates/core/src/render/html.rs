use crate::types::{char_slice, Explanation, ExplanationTarget, OutcomeKind, Span};

/// White at weight 0 to full red at weight 1.
pub fn weight_color(weight: f64) -> (u8, u8, u8) {
    let fade = (255.0 * (1.0 - weight.clamp(0.0, 1.0))).round() as u8;
    (255, fade, fade)
}

pub fn html_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn excerpt(text: &str, limit: usize) -> String {
    if text.chars().count() <= limit {
        text.to_string()
    } else {
        text.chars().take(limit).collect::<String>() + "…"
    }
}

const STYLE: &str = "body{font-family:sans-serif;margin:2em;max-width:60em}\
.source{white-space:pre-wrap;font-size:1.1em;line-height:1.6;font-family:inherit}\
.feature{border-radius:3px;cursor:help}\
.protected{color:#777;font-style:italic}\
.legend span{display:inline-block;padding:0 .6em}\
.meta{color:#444;margin-bottom:1em}";

/// Self-contained HTML page with a white-to-red heatmap over the source.
pub fn render_html(explanation: &Explanation) -> String {
    let source = &explanation.source_text;
    let total = source.chars().count();

    enum Mark<'a> {
        Feature(&'a crate::types::AttributedFeature),
        Protected,
    }
    let mut marks: Vec<(Span, Mark)> = explanation
        .features
        .iter()
        .map(|f| (f.feature.span, Mark::Feature(f)))
        .chain(explanation.protected_spans.iter().map(|s| (*s, Mark::Protected)))
        .collect();
    marks.sort_by_key(|(s, _)| (s.start, s.end));

    let mut body = String::new();
    let mut cursor = 0;
    for (span, mark) in marks {
        if span.start < cursor {
            continue;
        }
        body.push_str(&html_escape(char_slice(source, Span::new(cursor, span.start))));
        let text = html_escape(char_slice(source, span));
        match mark {
            Mark::Protected => {
                body.push_str(&format!("<span class=\"protected\">{text}</span>"));
            }
            Mark::Feature(f) => {
                let (r, g, b) = weight_color(f.weight);
                let output = match f.outcome.kind {
                    OutcomeKind::RetrievalScore => format!(
                        "score {:.4}; perturbed: {}",
                        f.outcome.score.unwrap_or_default(),
                        excerpt(&f.outcome.perturbed_text, 120)
                    ),
                    OutcomeKind::GeneratedText => {
                        format!("response: {}", excerpt(f.outcome.response_text.as_deref().unwrap_or(""), 120))
                    }
                };
                let title = format!("weight {:.3}, raw delta {:.4}, {output}", f.weight, f.raw_delta);
                body.push_str(&format!(
                    "<span class=\"feature\" data-index=\"{}\" data-weight=\"{:.6}\" \
                     style=\"background-color:rgb({r},{g},{b})\" title=\"{}\">{text}</span>",
                    f.feature.index,
                    f.weight,
                    html_escape(&title)
                ));
            }
        }
        cursor = span.end;
    }
    body.push_str(&html_escape(char_slice(source, Span::new(cursor, total))));

    let meta = match explanation.target {
        ExplanationTarget::Retrieval => format!(
            "Retrieval explanation &middot; reference score {:.4} &middot; {}",
            explanation.reference_score.unwrap_or_default(),
            html_escape(explanation.backend_id())
        ),
        ExplanationTarget::Generation => format!(
            "Generation explanation &middot; reference response: {} &middot; {}",
            html_escape(explanation.reference_response.as_deref().unwrap_or("")),
            html_escape(explanation.backend_id())
        ),
    };
    let legend: String = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|w| {
            let (r, g, b) = weight_color(*w);
            format!("<span style=\"background-color:rgb({r},{g},{b})\">{w:.2}</span>")
        })
        .collect();

    format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n\
         <title>ragx explanation</title>\n<style>{STYLE}</style>\n</head>\n<body>\n\
         <div class=\"meta\">{meta}</div>\n<div class=\"legend\">{legend}</div>\n\
         <pre class=\"source\">{body}</pre>\n</body>\n</html>\n"
    )
}
