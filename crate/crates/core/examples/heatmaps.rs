//! Render one explanation as terminal colors, HTML and canonical JSON.
//!
//! Writes `rings.html` and `rings.json` to the temp directory.

use ragx::backends::{EmbedderProvider, LexicalProvider};
use ragx::explain::explain_retrieval_text;
use ragx::render::{explanation_id, render_ansi, render_html, to_canonical_json};
use ragx::{ExplainerConfig, Question};

#[tokio::main]
async fn main() -> ragx::Result<()> {
    let question = Question::from_text("which planet has rings")?;
    let text = "Saturn is the planet with the most visible rings. It is a gas giant.";
    let embedder = LexicalProvider::default().embedder_for(&[&question.text, text])?;
    let explanation = explain_retrieval_text(&question, text, embedder, &ExplainerConfig::default()).await?;

    println!("{}", render_ansi(&explanation, Some(3)));
    let dir = std::env::temp_dir();
    std::fs::write(dir.join("rings.html"), render_html(&explanation))?;
    std::fs::write(dir.join("rings.json"), to_canonical_json(&explanation))?;
    println!("id {}", explanation_id(&explanation));
    println!("wrote {}", dir.join("rings.html").display());
    Ok(())
}
