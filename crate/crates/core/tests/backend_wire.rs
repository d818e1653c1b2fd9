mod common;

use std::sync::Arc;
use std::time::Duration;

use ragx::backends::{
    CachedGenerator, ChatRequest, Embedder, EmbeddingsRequest, Generator, OpenAiEmbedder, OpenAiGenerator,
    RetryPolicy, EMBED_BATCH_SIZE,
};
use ragx::error::Error;
use ragx::explain::explain_retrieval_text;
use ragx::types::{ExplainerConfig, Question};
use serde_json::Value;

use common::{mock_vector, MockOpenAi, SKY_D, SKY_Q};

fn quick() -> RetryPolicy {
    RetryPolicy {
        delays: vec![Duration::from_millis(1); 3],
    }
}

fn bodies(server: &MockOpenAi) -> Vec<Value> {
    server
        .requests()
        .iter()
        .map(|r| serde_json::from_slice(&r.body).unwrap())
        .collect()
}

#[test]
fn default_backoff_schedule() {
    let policy = RetryPolicy::default();
    assert_eq!(
        policy.delays,
        [Duration::from_millis(250), Duration::from_secs(1), Duration::from_secs(4)]
    );
    assert_eq!(policy.max_attempts(), 4);
}

#[test]
fn wire_structs_serialize_exactly() {
    let embed = EmbeddingsRequest {
        model: "m".into(),
        input: vec!["a".into(), "é\"".into()],
    };
    assert_eq!(serde_json::to_string(&embed).unwrap(), r#"{"model":"m","input":["a","é\""]}"#);
    let chat = ChatRequest::user("m", "hi", Some(7));
    assert_eq!(
        serde_json::to_string(&chat).unwrap(),
        r#"{"model":"m","messages":[{"role":"user","content":"hi"}],"temperature":0,"seed":7}"#
    );
}

#[tokio::test]
async fn seed_is_sent_when_configured() {
    let server = MockOpenAi::start().await;
    let g = OpenAiGenerator::new(&server.endpoint(), "m", None).with_seed(42);
    g.generate("p").await.unwrap();
    assert_eq!(
        server.requests()[0].body.as_ref(),
        br#"{"model":"m","messages":[{"role":"user","content":"p"}],"temperature":0,"seed":42}"#
    );
    assert!(server.requests()[0].authorization.is_none());
    assert!(!g.descriptor().deterministic);
}

#[tokio::test]
async fn embeddings_are_batched_by_64() {
    let server = MockOpenAi::start().await;
    let e = OpenAiEmbedder::new(&server.endpoint(), "m", None);
    let texts: Vec<String> = (0..150).map(|i| format!("text {i}")).collect();
    let vectors = e.embed(&texts).await.unwrap();
    assert_eq!(vectors.len(), 150);
    let sizes: Vec<usize> = bodies(&server).iter().map(|b| b["input"].as_array().unwrap().len()).collect();
    assert_eq!(sizes, [EMBED_BATCH_SIZE, EMBED_BATCH_SIZE, 150 - 2 * EMBED_BATCH_SIZE]);
    for (t, v) in texts.iter().zip(&vectors) {
        assert_eq!(*v, ragx::backends::EmbeddingVector::normalized(mock_vector(t)).unwrap());
    }
}

#[tokio::test]
async fn empty_texts_become_zero_vectors_locally() {
    let server = MockOpenAi::start().await;
    let e = OpenAiEmbedder::new(&server.endpoint(), "m", None);
    let v = e.embed(&["".into(), "sky".into(), "".into()]).await.unwrap();
    assert!(v[0].is_zero() && v[2].is_zero());
    assert_eq!(v[1].dimension(), 3);
    assert_eq!(bodies(&server)[0]["input"], serde_json::json!(["sky"]));

    server.clear();
    let sized = OpenAiEmbedder::new(&server.endpoint(), "m", None).with_dimension(3);
    assert!(sized.embed(&["".into()]).await.unwrap()[0].is_zero());
    assert!(server.requests().is_empty());
}

#[tokio::test]
async fn embeddings_retry_then_fail_as_unavailable() {
    let server = MockOpenAi::start().await;
    let e = OpenAiEmbedder::new(&server.endpoint(), "m", None).with_retry(quick());
    server.fail_next(&[500, 500, 500, 500]);
    let err = e.embed(&["x".into()]).await.unwrap_err();
    assert!(matches!(err, Error::BackendUnavailable(_)), "{err}");
    assert_eq!(server.requests().len(), 4);

    server.clear();
    server.fail_next(&[429, 500]);
    assert!(e.embed(&["x".into()]).await.is_ok());
    assert_eq!(server.requests().len(), 3);

    server.clear();
    let no_retry = OpenAiEmbedder::new(&server.endpoint(), "m", None).with_retry(RetryPolicy::none());
    server.fail_next(&[503]);
    assert!(no_retry.embed(&["x".into()]).await.is_err());
    assert_eq!(server.requests().len(), 1);
}

#[tokio::test]
async fn client_errors_carry_the_remote_message() {
    let server = MockOpenAi::start().await;
    let e = OpenAiEmbedder::new(&server.endpoint(), "m", None).with_retry(quick());
    server.fail_next(&[400]);
    match e.embed(&["x".into()]).await.unwrap_err() {
        Error::BackendProtocol(message) => assert!(message.contains("scripted 400"), "{message}"),
        other => panic!("{other}"),
    }
}

#[tokio::test]
async fn health_probes_the_models_endpoint() {
    let server = MockOpenAi::start().await;
    assert!(OpenAiGenerator::new(&server.endpoint(), "m", None).health().await);
    assert!(!OpenAiGenerator::new("http://127.0.0.1:9/v1", "m", None).health().await);
}

#[tokio::test]
async fn cached_generator_sends_each_prompt_once() {
    let server = MockOpenAi::start().await;
    let g = CachedGenerator::new(Arc::new(OpenAiGenerator::new(&server.endpoint(), "m", None)));
    let g = &g;
    futures::future::join_all((0..10).map(|i| async move { g.generate(if i % 2 == 0 { "a" } else { "b" }).await.unwrap() }))
        .await;
    assert_eq!(server.requests().len(), 2);
}

#[tokio::test]
async fn retrieval_explanation_over_remote_embedder() {
    let server = MockOpenAi::start().await;
    let e: Arc<dyn Embedder> = Arc::new(OpenAiEmbedder::new(&server.endpoint(), "m", None));
    let explanation = explain_retrieval_text(&Question::from_text(SKY_Q).unwrap(), SKY_D, e, &ExplainerConfig::default())
        .await
        .unwrap();
    assert_eq!(explanation.features.len(), 4);
    assert_eq!(explanation.backend.backend_id, "openai-embeddings");
    // question, document and four perturbations are distinct, sent in one batch
    assert_eq!(server.requests().len(), 1);
    assert_eq!(bodies(&server)[0]["input"].as_array().unwrap().len(), 6);
}
