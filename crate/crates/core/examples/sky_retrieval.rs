//! Which words make "the sky is blue" similar to "what color is the sky"?
//!
//! ```text
//! cargo run --example sky_retrieval
//! ```

use ragx::backends::{EmbedderProvider, LexicalProvider};
use ragx::explain::explain_retrieval_text;
use ragx::render::render_ansi;
use ragx::{ExplainerConfig, Question};

#[tokio::main]
async fn main() -> ragx::Result<()> {
    let question = Question::from_text("what color is the sky")?;
    let document = "the sky is blue";
    let embedder = LexicalProvider::default().embedder_for(&[&question.text, document])?;

    let explanation = explain_retrieval_text(&question, document, embedder, &ExplainerConfig::default()).await?;

    println!("s_d = {:.5}", explanation.reference_score.unwrap_or_default());
    for f in &explanation.features {
        println!(
            "{:>6}  s_i = {:.5}  delta = {:+.5}  weight = {:.3}",
            f.feature.text,
            f.outcome.score.unwrap_or_default(),
            f.raw_delta,
            f.weight
        );
    }
    println!("{}", render_ansi(&explanation, None));
    Ok(())
}
