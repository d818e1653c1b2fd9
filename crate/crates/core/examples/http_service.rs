//! Serve the HTTP API over an index built from the test corpus.
//!
//! ```text
//! cargo run --example http_service
//! curl -s localhost:8080/api/explain/retrieval \
//!   -d '{"question":"what color is the sky","document_id":"sky.txt"}'
//! ```

use std::path::Path;

use ragx::app::App;
use ragx::config::AppConfig;
use ragx::rag::VectorIndex;

#[tokio::main]
async fn main() -> ragx::Result<()> {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let index_path = std::env::temp_dir().join("ragx-http-example.ragx");
    let mut config = AppConfig::default();
    config.service.cors_origin = Some("http://localhost:5173".into());
    ragx::cli::index_corpus(&config, &corpus, &index_path).await?;

    let port = config.service.port;
    let app = App::new(config, Some(VectorIndex::load(&index_path)?))?;
    println!("listening on http://localhost:{port}");
    ragx::service::serve(app, port).await
}
