mod common;

use std::path::PathBuf;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use ragx::app::App;
use ragx::config::AppConfig;
use ragx::render::{explanation_from_json, explanation_id};
use ragx::service::{router, EXPLANATION_ID_HEADER};
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{CAPITAL_PROMPT, SKY_D, SKY_Q};

struct Reply {
    status: StatusCode,
    header: Option<String>,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap()
    }
}

async fn send(router: &Router, method: &str, path: &str, body: Option<&str>) -> Reply {
    let request = Request::builder()
        .method(method)
        .uri(path)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
        .unwrap();
    let response = router.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let header = response
        .headers()
        .get(EXPLANATION_ID_HEADER)
        .map(|v| v.to_str().unwrap().to_string());
    let body = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, header, body }
}

fn offline() -> Router {
    router(App::new(AppConfig::default(), None).unwrap())
}

async fn indexed() -> (tempfile::TempDir, Router) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("i.ragx");
    let corpus = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let config = AppConfig::default();
    ragx::cli::index_corpus(&config, &corpus, &path).await.unwrap();
    let index = ragx::rag::VectorIndex::load(&path).unwrap();
    (dir, router(App::new(config, Some(index)).unwrap()))
}

#[tokio::test]
async fn explain_retrieval_stores_by_digest() {
    let app = offline();
    let body = json!({"question": SKY_Q, "text": SKY_D}).to_string();
    let reply = send(&app, "POST", "/api/explain/retrieval", Some(&body)).await;
    assert_eq!(reply.status, StatusCode::OK);
    let e = explanation_from_json(std::str::from_utf8(&reply.body).unwrap()).unwrap();
    let id = reply.header.clone().unwrap();
    assert_eq!(id, explanation_id(&e));

    let sky = e.feature_by_text("sky").unwrap().feature.index;
    let what_if = send(&app, "POST", &format!("/api/perturbation/{id}/{sky}"), None).await;
    assert_eq!(what_if.status, StatusCode::OK);
    let outcome = what_if.json();
    assert_eq!(outcome["perturbed_text"], "the is blue");
    assert_eq!(outcome["score"], json!(0.516397779));

    let again = send(&app, "POST", "/api/explain/retrieval", Some(&body)).await;
    assert_eq!(again.body, reply.body);
    assert_eq!(again.header.unwrap(), id);
}

#[tokio::test]
async fn unknown_explanation_or_feature_is_404() {
    let app = offline();
    let reply = send(&app, "POST", "/api/perturbation/deadbeef/0", None).await;
    assert_eq!(reply.status, StatusCode::NOT_FOUND);
    assert_eq!(reply.json()["code"], "not_found");

    let body = json!({"question": SKY_Q, "text": SKY_D}).to_string();
    let id = send(&app, "POST", "/api/explain/retrieval", Some(&body)).await.header.unwrap();
    let reply = send(&app, "POST", &format!("/api/perturbation/{id}/99"), None).await;
    assert_eq!(reply.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_bodies_are_400() {
    let app = offline();
    for body in ["{", "[]", "{\"text\": \"no question\"}", "{\"question\": 3}"] {
        let reply = send(&app, "POST", "/api/explain/retrieval", Some(body)).await;
        assert_eq!(reply.status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(reply.json()["code"], "malformed_body");
    }
}

#[tokio::test]
async fn degenerate_input_is_422() {
    let (_dir, app) = indexed().await;
    let reply = send(&app, "POST", "/api/query", Some(r#"{"question": "  "}"#)).await;
    assert_eq!(reply.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(reply.json()["code"], "empty_input");

    let reply = send(
        &app,
        "POST",
        "/api/explain/retrieval",
        Some(&json!({"question": "q", "text": "   "}).to_string()),
    )
    .await;
    assert_eq!(reply.status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn query_and_unknown_document() {
    let (_dir, app) = indexed().await;
    let reply = send(&app, "POST", "/api/query", Some(r#"{"question": "What is the capital of France?", "k": 2}"#)).await;
    assert_eq!(reply.status, StatusCode::OK);
    let result = reply.json();
    assert_eq!(result["retrieved"].as_array().unwrap().len(), 2);
    assert_eq!(result["response"]["text"], "Paris is the capital of France.");
    assert!(result["prompt"]["rendered"].as_str().unwrap().starts_with("Answer using the context."));

    let reply = send(
        &app,
        "POST",
        "/api/explain/retrieval",
        Some(r#"{"question": "q", "document_id": "nope.txt"}"#),
    )
    .await;
    assert_eq!(reply.status, StatusCode::NOT_FOUND);

    let reply = send(
        &app,
        "POST",
        "/api/explain/retrieval",
        Some(r#"{"question": "What is the capital of France?", "document_id": "france.txt", "granularity": "sentence"}"#),
    )
    .await;
    assert_eq!(reply.status, StatusCode::OK);
    let e = explanation_from_json(std::str::from_utf8(&reply.body).unwrap()).unwrap();
    assert_eq!(e.features.len(), 2);
}

#[tokio::test]
async fn query_without_index_is_404() {
    let reply = send(&offline(), "POST", "/api/query", Some(r#"{"question": "x"}"#)).await;
    assert_eq!(reply.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn explain_supplied_pair() {
    let app = offline();
    let body = json!({"prompt": CAPITAL_PROMPT, "reference_response": "Paris is the capital of France."});
    let reply = send(&app, "POST", "/api/explain/generation", Some(&body.to_string())).await;
    assert_eq!(reply.status, StatusCode::OK);
    let e = explanation_from_json(std::str::from_utf8(&reply.body).unwrap()).unwrap();
    assert_eq!(e.reference_response.as_deref(), Some("Paris is the capital of France."));
    // no template is known for a raw prompt, so its labels are features too
    let paris = e
        .features
        .iter()
        .find(|f| f.feature.text.contains("Paris is the capital"))
        .unwrap();
    assert_eq!(paris.weight, 1.0);
    assert!(e.protected_spans.is_empty());
}

#[tokio::test]
async fn unknown_comparator_is_rejected() {
    let (_dir, app) = indexed().await;
    let body = json!({"question": "What is the capital of France?", "comparator": "bleu"});
    let reply = send(&app, "POST", "/api/explain/generation", Some(&body.to_string())).await;
    assert_eq!(reply.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(reply.json()["code"], "unknown_comparator");
}

#[tokio::test]
async fn health_reports_backends() {
    let reply = send(&offline(), "GET", "/api/health", None).await;
    assert_eq!(reply.status, StatusCode::OK);
    let health = reply.json();
    assert_eq!(health["status"], "ok");
    let backends = health["backends"].as_array().unwrap();
    assert_eq!(backends.len(), 2);
    assert!(backends.iter().all(|b| b["reachable"] == true));
}

#[tokio::test]
async fn health_flags_unreachable_generator() {
    let mut config = AppConfig::default();
    config.generator.kind = "openai".into();
    config.generator.endpoint = Some("http://127.0.0.1:9/v1".into());
    config.generator.model = Some("m".into());
    let app = router(App::new(config, None).unwrap());
    let reply = send(&app, "GET", "/api/health", None).await;
    assert_eq!(reply.status, StatusCode::OK);
    let health = reply.json();
    let generator = health["backends"]
        .as_array()
        .unwrap()
        .iter()
        .find(|b| b["kind"] == "generator")
        .unwrap()
        .clone();
    assert_eq!(generator["backend_id"], "openai-chat");
    assert_eq!(generator["reachable"], false);
}

#[tokio::test]
async fn backend_failure_is_502() {
    let mut config = AppConfig::default();
    config.embedder.kind = "openai".into();
    config.embedder.endpoint = Some("http://127.0.0.1:9/v1".into());
    config.embedder.model = Some("m".into());
    let app = router(App::new(config, None).unwrap());
    let body = json!({"question": SKY_Q, "text": SKY_D}).to_string();
    let reply = send(&app, "POST", "/api/explain/retrieval", Some(&body)).await;
    assert_eq!(reply.status, StatusCode::BAD_GATEWAY);
    assert_eq!(reply.json()["code"], "backend_unavailable");
}

#[tokio::test]
async fn config_is_redacted() {
    let mut config = AppConfig::default();
    config.generator.api_key = Some("sk-secret".into());
    let app = router(App::new(config, None).unwrap());
    let reply = send(&app, "GET", "/api/config", None).await;
    let text = String::from_utf8(reply.body.clone()).unwrap();
    assert!(!text.contains("sk-secret"));
    assert_eq!(reply.json()["generator"]["api_key"], "***");
    assert_eq!(reply.json()["explain"]["strategy_id"], "leave_one_out");
}

#[tokio::test]
async fn lru_evicts_oldest_explanation() {
    let mut config = AppConfig::default();
    config.service.lru_capacity = 1;
    let app = router(App::new(config, None).unwrap());
    let first = send(&app, "POST", "/api/explain/retrieval", Some(&json!({"question": SKY_Q, "text": SKY_D}).to_string())).await;
    let second = send(&app, "POST", "/api/explain/retrieval", Some(&json!({"question": "sky", "text": "blue sky"}).to_string())).await;
    let id1 = first.header.unwrap();
    let id2 = second.header.unwrap();
    assert_eq!(send(&app, "POST", &format!("/api/perturbation/{id1}/0"), None).await.status, StatusCode::NOT_FOUND);
    assert_eq!(send(&app, "POST", &format!("/api/perturbation/{id2}/0"), None).await.status, StatusCode::OK);
}

#[tokio::test]
async fn cors_allows_configured_origin() {
    let mut config = AppConfig::default();
    config.service.cors_origin = Some("http://localhost:5173".into());
    let app = router(App::new(config, None).unwrap());
    let request = Request::builder()
        .method("OPTIONS")
        .uri("/api/explain/retrieval")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let response = app.oneshot(request).await.unwrap();
    assert_eq!(
        response.headers().get("access-control-allow-origin").unwrap(),
        "http://localhost:5173"
    );
}

#[tokio::test]
async fn concurrent_requests_agree() {
    let app = offline();
    let body = json!({"question": SKY_Q, "text": SKY_D}).to_string();
    let replies = futures::future::join_all((0..16).map(|_| send(&app, "POST", "/api/explain/retrieval", Some(&body)))).await;
    assert!(replies.iter().all(|r| r.status == StatusCode::OK && r.body == replies[0].body));
}
