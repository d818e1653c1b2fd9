//! Score explanations against human-marked spans.

use std::path::Path;
use std::sync::Arc;

use ragx::backends::{ExtractiveMockGenerator, LexicalProvider};
use ragx::eval::run_eval;
use ragx::ExplainerConfig;

#[tokio::main]
async fn main() -> ragx::Result<()> {
    let path = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/eval_cases.jsonl")
    });
    let report = run_eval(
        &path,
        &ExplainerConfig::default(),
        &LexicalProvider::default(),
        Arc::new(ExtractiveMockGenerator::default()),
    )
    .await?;
    print!("{}", report.to_table());
    Ok(())
}
