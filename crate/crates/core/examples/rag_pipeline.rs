//! Index a small corpus, answer a question, and explain every stage.
//!
//! ```text
//! cargo run --example rag_pipeline -- "Who wrote Hamlet?"
//! ```

use std::path::Path;

use ragx::app::App;
use ragx::config::AppConfig;
use ragx::rag::VectorIndex;

#[tokio::main]
async fn main() -> ragx::Result<()> {
    let question = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "What is the capital of France?".to_string());
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let dir = std::env::temp_dir().join("ragx-example");
    std::fs::create_dir_all(&dir)?;
    let index_path = dir.join("corpus.ragx");

    let config = AppConfig::default();
    let n = ragx::cli::index_corpus(&config, &corpus, &index_path).await?;
    println!("indexed {n} documents");

    let app = App::new(config, Some(VectorIndex::load(&index_path)?))?;
    let (result, explanations) = app.explain_all(&question, Some(2)).await?;

    for (hit, e) in result.retrieved.iter().zip(&explanations.retrieval) {
        let top = e.ranking().first().map(|&i| e.features[i].feature.text.clone());
        println!("{:.4}  {:<16} top word: {}", hit.score, hit.doc.id, top.unwrap_or_default());
    }
    println!("answer: {}", result.response.text);
    for f in &explanations.generation.features {
        println!("  {:.3}  {}", f.weight, f.feature.text);
    }
    Ok(())
}
