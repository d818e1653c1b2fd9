//! HTTP API over [`App`].
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/api/health` | |
//! | POST | `/api/query` | `{question, k?}` |
//! | POST | `/api/explain/retrieval` | `{question, document_id? \| text?, strategy?, granularity?}` |
//! | POST | `/api/explain/generation` | `{question, k?, comparator?, include_instruction?}` or `{prompt, reference_response?}` |
//! | POST | `/api/perturbation/{explanation_id}/{feature_index}` | |
//! | GET | `/api/config` | |
//!
//! Explanation responses are the same canonical JSON bytes the CLI prints.
//! Their content digest comes back in the `x-explanation-id` header and
//! addresses the stored copy for `/api/perturbation`.

use std::future::Future;
use std::num::NonZeroUsize;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use lru::LruCache;
use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::CorsLayer;

use crate::app::{App, GenerationRequest, RetrievalRequest};
use crate::error::{Error, ErrorClass, Result};
use crate::render::{canonical_json, explanation_id, to_canonical_json};
use crate::types::Explanation;

pub const EXPLANATION_ID_HEADER: &str = "x-explanation-id";

struct ServiceState {
    app: App,
    explanations: Mutex<LruCache<String, Arc<Explanation>>>,
    timeout: Duration,
}

/// Build the router. Backend calls made through `app` are capped by
/// `service.max_inflight` from its config.
pub fn router(app: App) -> Router {
    let service = app.config.service.clone();
    let capacity = NonZeroUsize::new(service.lru_capacity).unwrap_or(NonZeroUsize::MIN);
    let state = Arc::new(ServiceState {
        app: app.with_backend_limit(service.max_inflight),
        explanations: Mutex::new(LruCache::new(capacity)),
        timeout: Duration::from_secs(service.timeout_secs),
    });
    let router = Router::new()
        .route("/api/health", get(health))
        .route("/api/config", get(config))
        .route("/api/query", post(query))
        .route("/api/explain/retrieval", post(explain_retrieval))
        .route("/api/explain/generation", post(explain_generation))
        .route("/api/perturbation/{id}/{index}", post(perturbation))
        .with_state(state);
    match service.cors_origin.as_deref().map(HeaderValue::from_str) {
        Some(Ok(origin)) => router.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([axum::http::Method::GET, axum::http::Method::POST])
                .allow_headers([header::CONTENT_TYPE])
                .expose_headers([header::HeaderName::from_static(EXPLANATION_ID_HEADER)]),
        ),
        _ => router,
    }
}

/// Serve on `0.0.0.0:port` until the process is stopped.
pub async fn serve(app: App, port: u16) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    tracing::info!(port, "listening");
    axum::serve(listener, router(app)).await?;
    Ok(())
}

/// Error body `{code, message}` with the status for its class.
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
        }
    }
}

pub fn status_for(err: &Error) -> StatusCode {
    match (err, err.class()) {
        (Error::NotFound(_), _) => StatusCode::NOT_FOUND,
        (_, ErrorClass::Backend) => StatusCode::BAD_GATEWAY,
        (Error::Io(_) | Error::IndexFormat(_), _) => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        ApiError::new(status_for(&err), err.code(), err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message }).to_string();
        (self.status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

type ApiResult = std::result::Result<Response, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> std::result::Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_body", e.to_string()))
}

fn json_response(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn bounded<T>(state: &ServiceState, work: impl Future<Output = Result<T>>) -> std::result::Result<T, ApiError> {
    match tokio::time::timeout(state.timeout, work).await {
        Ok(result) => result.map_err(ApiError::from),
        Err(_) => Err(ApiError::new(
            StatusCode::GATEWAY_TIMEOUT,
            "timeout",
            format!("request exceeded {} s", state.timeout.as_secs()),
        )),
    }
}

fn store(state: &ServiceState, explanation: Explanation) -> Response {
    let body = to_canonical_json(&explanation);
    let id = explanation_id(&explanation);
    state.explanations.lock().put(id.clone(), Arc::new(explanation));
    let mut response = json_response(body);
    if let Ok(value) = HeaderValue::from_str(&id) {
        response.headers_mut().insert(EXPLANATION_ID_HEADER, value);
    }
    response
}

async fn health(State(state): State<Arc<ServiceState>>) -> ApiResult {
    let backends = state.app.health().await;
    Ok(json_response(canonical_json(&json!({ "status": "ok", "backends": backends }))?))
}

async fn config(State(state): State<Arc<ServiceState>>) -> ApiResult {
    Ok(json_response(canonical_json(&state.app.config.redacted())?))
}

#[derive(Deserialize)]
struct QueryBody {
    question: String,
    #[serde(default)]
    k: Option<usize>,
}

async fn query(State(state): State<Arc<ServiceState>>, body: Bytes) -> ApiResult {
    let req: QueryBody = parse(&body)?;
    let result = bounded(&state, state.app.query(&req.question, req.k)).await?;
    Ok(json_response(canonical_json(&result)?))
}

async fn explain_retrieval(State(state): State<Arc<ServiceState>>, body: Bytes) -> ApiResult {
    let req: RetrievalRequest = parse(&body)?;
    let explanation = bounded(&state, state.app.explain_retrieval(&req)).await?;
    Ok(store(&state, explanation))
}

#[derive(Deserialize)]
struct PairBody {
    prompt: String,
    #[serde(default)]
    reference_response: Option<String>,
    #[serde(default)]
    comparator: Option<String>,
}

async fn explain_generation(State(state): State<Arc<ServiceState>>, body: Bytes) -> ApiResult {
    let value: serde_json::Value = parse(&body)?;
    let explanation = if value.get("prompt").is_some() {
        let req: PairBody = parse(&body)?;
        bounded(
            &state,
            state
                .app
                .explain_prompt(&req.prompt, req.reference_response.as_deref(), req.comparator.as_deref()),
        )
        .await?
    } else {
        let req: GenerationRequest = parse(&body)?;
        bounded(&state, state.app.explain_generation(&req)).await?
    };
    Ok(store(&state, explanation))
}

async fn perturbation(
    State(state): State<Arc<ServiceState>>,
    Path((id, index)): Path<(String, usize)>,
) -> ApiResult {
    let explanation = state
        .explanations
        .lock()
        .get(&id)
        .cloned()
        .ok_or_else(|| Error::NotFound(format!("explanation `{id}`")))?;
    let feature = explanation
        .features
        .iter()
        .find(|f| f.feature.index == index)
        .ok_or_else(|| Error::NotFound(format!("feature {index} of explanation `{id}`")))?;
    Ok(json_response(canonical_json(&feature.outcome)?))
}
