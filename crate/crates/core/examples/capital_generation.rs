//! Explain an extractive answer sentence by sentence.
//!
//! The instruction and labels of the template are protected, so only the
//! context sentences and the question are perturbed.

use std::sync::Arc;

use ragx::backends::ExtractiveMockGenerator;
use ragx::explain::explain_generation;
use ragx::rag::{compose_prompt, PromptTemplate, DEFAULT_TEMPLATE};
use ragx::{Document, ExplainerConfig};

#[tokio::main]
async fn main() -> ragx::Result<()> {
    let context = Document::new("ctx", "Paris is the capital of France. Berlin is the capital of Germany.")?;
    let template = PromptTemplate::new(DEFAULT_TEMPLATE)?;
    let prompt = compose_prompt(&template, "What is the capital of France?", &[context], true)?;

    let generator = Arc::new(ExtractiveMockGenerator::default());
    let explanation = explain_generation(&prompt, generator, &ExplainerConfig::default(), None, None).await?;

    println!("answer: {}", explanation.reference_response.as_deref().unwrap_or(""));
    for f in &explanation.features {
        let response = f.outcome.response_text.as_deref().unwrap_or("");
        println!("{:.3}  {:<36} -> {response}", f.weight, f.feature.text);
    }
    Ok(())
}
