//! Explain against any OpenAI-compatible server.
//!
//! ```text
//! RAGX_ENDPOINT=http://localhost:11434/v1 RAGX_EMBED_MODEL=nomic-embed-text \
//! RAGX_CHAT_MODEL=llama3 cargo run --example openai_backends
//! ```
//!
//! `RAGX_API_KEY` is sent as a bearer token when set.

use std::sync::Arc;

use ragx::backends::{Embedder, Generator, OpenAiEmbedder, OpenAiGenerator};
use ragx::explain::{explain_generation, explain_retrieval_text};
use ragx::render::render_ansi;
use ragx::{ExplainerConfig, Prompt, Question};

#[tokio::main]
async fn main() -> ragx::Result<()> {
    let Ok(endpoint) = std::env::var("RAGX_ENDPOINT") else {
        eprintln!("set RAGX_ENDPOINT (and RAGX_EMBED_MODEL / RAGX_CHAT_MODEL) to run this example");
        return Ok(());
    };
    let embed_model = std::env::var("RAGX_EMBED_MODEL").unwrap_or_else(|_| "text-embedding-3-small".into());
    let chat_model = std::env::var("RAGX_CHAT_MODEL").unwrap_or_else(|_| "gpt-4o-mini".into());

    let embedder: Arc<dyn Embedder> = Arc::new(OpenAiEmbedder::new(&endpoint, &embed_model, None));
    let generator: Arc<dyn Generator> = Arc::new(OpenAiGenerator::new(&endpoint, &chat_model, None).with_seed(0));
    let config = ExplainerConfig::default();

    let question = Question::from_text("what color is the sky")?;
    let retrieval = explain_retrieval_text(&question, "the sky is blue", embedder.clone(), &config).await?;
    println!("{}", render_ansi(&retrieval, None));

    let prompt = Prompt::raw(
        "Context: The Nile is the longest river in Africa. The Amazon carries the most water.\n\
         Question: Which river is the longest in Africa? Answer in one word.",
    );
    let config = ExplainerConfig {
        comparator_id: "embedding".into(),
        ..config
    };
    let generation = explain_generation(&prompt, generator, &config, None, Some(embedder)).await?;
    println!("{}", render_ansi(&generation, None));
    Ok(())
}
