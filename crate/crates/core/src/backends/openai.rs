//! OpenAI-compatible HTTP clients for `/embeddings` and `/chat/completions`.

use std::time::Duration;

use async_trait::async_trait;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::{check_batch, Embedder, EmbeddingVector, Generator, EMBED_BATCH_SIZE};
use crate::error::{Error, Result};
use crate::types::{short_digest, BackendDescriptor, BackendKind, GeneratedResponse};

/// Environment variable holding the bearer token; overrides any configured key.
pub const API_KEY_ENV: &str = "RAGX_API_KEY";

/// Backoff schedule applied to transport failures, 429 and 5xx responses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub delays: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            delays: vec![
                Duration::from_millis(250),
                Duration::from_secs(1),
                Duration::from_secs(4),
            ],
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy { delays: Vec::new() }
    }

    pub fn max_attempts(&self) -> usize {
        self.delays.len() + 1
    }

    pub fn is_retryable(status: StatusCode) -> bool {
        status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingsRequest {
    pub model: String,
    pub input: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    /// Always 0; serialized as an integer.
    pub temperature: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn user(model: &str, prompt: &str, seed: Option<u64>) -> Self {
        ChatRequest {
            model: model.to_string(),
            messages: vec![ChatMessage {
                role: "user".to_string(),
                content: prompt.to_string(),
            }],
            temperature: 0,
            seed,
        }
    }
}

#[derive(Debug, Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Debug, Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatMessageOut,
}

#[derive(Debug, Deserialize)]
struct ChatMessageOut {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug, Clone)]
struct HttpTransport {
    client: reqwest::Client,
    endpoint: String,
    api_key: Option<String>,
    retry: RetryPolicy,
}

impl HttpTransport {
    fn new(endpoint: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .expect("http client builds");
        HttpTransport {
            client,
            endpoint: endpoint.trim_end_matches('/').to_string(),
            api_key: std::env::var(API_KEY_ENV).ok().or(api_key),
            retry: RetryPolicy::default(),
        }
    }

    async fn post_json(&self, path: &str, body: Vec<u8>) -> Result<Vec<u8>> {
        let url = format!("{}{}", self.endpoint, path);
        let mut last_err = None;
        for attempt in 0..self.retry.max_attempts() {
            if attempt > 0 {
                tokio::time::sleep(self.retry.delays[attempt - 1]).await;
            }
            let mut req = self
                .client
                .post(&url)
                .header(reqwest::header::CONTENT_TYPE, "application/json")
                .body(body.clone());
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send().await {
                Err(e) => {
                    warn!(%url, attempt, "transport error: {e}");
                    last_err = Some(Error::BackendUnavailable(format!("{url}: {e}")));
                }
                Ok(resp) => {
                    let status = resp.status();
                    let bytes = resp
                        .bytes()
                        .await
                        .map_err(|e| Error::BackendUnavailable(format!("{url}: {e}")))?;
                    if status.is_success() {
                        return Ok(bytes.to_vec());
                    }
                    let message = remote_message(&bytes);
                    if RetryPolicy::is_retryable(status) {
                        debug!(%url, attempt, %status, "retryable status");
                        last_err = Some(Error::BackendUnavailable(format!("{status}: {message}")));
                    } else {
                        return Err(Error::BackendProtocol(format!("{status}: {message}")));
                    }
                }
            }
        }
        Err(last_err.unwrap_or(Error::BackendUnavailable(url)))
    }

    async fn reachable(&self) -> bool {
        let url = format!("{}/models", self.endpoint);
        let mut req = self.client.get(url).timeout(Duration::from_secs(3));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        req.send().await.is_ok()
    }
}

fn remote_message(body: &[u8]) -> String {
    serde_json::from_slice::<serde_json::Value>(body)
        .ok()
        .and_then(|v| {
            v.pointer("/error/message")
                .and_then(|m| m.as_str())
                .map(str::to_string)
        })
        .unwrap_or_else(|| String::from_utf8_lossy(body).into_owned())
}

/// Client for `POST {endpoint}/embeddings`.
#[derive(Debug, Clone)]
pub struct OpenAiEmbedder {
    transport: HttpTransport,
    model: String,
    dimension: Option<usize>,
}

impl OpenAiEmbedder {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>) -> Self {
        OpenAiEmbedder {
            transport: HttpTransport::new(endpoint, api_key, Duration::from_secs(60)),
            model: model.to_string(),
            dimension: None,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.transport.retry = retry;
        self
    }

    /// Declare the model's dimension so batches of only empty texts need no request.
    pub fn with_dimension(mut self, dimension: usize) -> Self {
        self.dimension = Some(dimension);
        self
    }

    async fn request(&self, input: Vec<String>) -> Result<Vec<EmbeddingVector>> {
        let expected = input.len();
        let body = serde_json::to_vec(&EmbeddingsRequest {
            model: self.model.clone(),
            input,
        })?;
        let bytes = self.transport.post_json("/embeddings", body).await?;
        let mut parsed: EmbeddingsResponse = serde_json::from_slice(&bytes)
            .map_err(|e| Error::BackendProtocol(format!("bad embeddings response: {e}")))?;
        parsed.data.sort_by_key(|d| d.index);
        let vectors = parsed
            .data
            .into_iter()
            .map(|d| EmbeddingVector::normalized(d.embedding))
            .collect::<Result<Vec<_>>>()?;
        check_batch(&vectors, expected)?;
        Ok(vectors)
    }
}

#[async_trait]
impl Embedder for OpenAiEmbedder {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            backend_id: "openai-embeddings".to_string(),
            kind: BackendKind::Embedder,
            endpoint: Some(self.transport.endpoint.clone()),
            model_name: Some(self.model.clone()),
            deterministic: true,
        }
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::InvalidArgument("embed called with no texts".into()));
        }
        let non_empty: Vec<(usize, String)> = texts
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.is_empty())
            .map(|(i, t)| (i, t.clone()))
            .collect();
        let mut fetched = Vec::with_capacity(non_empty.len());
        for chunk in non_empty.chunks(EMBED_BATCH_SIZE) {
            let batch = self.request(chunk.iter().map(|(_, t)| t.clone()).collect()).await?;
            fetched.extend(batch);
        }
        check_batch(&fetched, non_empty.len())?;
        let dimension = match (fetched.first(), self.dimension) {
            (Some(v), _) => v.dimension(),
            (None, Some(d)) => d,
            // only empty texts and no declared dimension: probe once
            (None, None) => self.request(vec![".".to_string()]).await?[0].dimension(),
        };
        let mut out = vec![EmbeddingVector::zero(dimension); texts.len()];
        for ((i, _), v) in non_empty.iter().zip(fetched) {
            out[*i] = v;
        }
        Ok(out)
    }

    async fn health(&self) -> bool {
        self.transport.reachable().await
    }
}

/// Client for `POST {endpoint}/chat/completions` with temperature pinned to 0.
#[derive(Debug, Clone)]
pub struct OpenAiGenerator {
    transport: HttpTransport,
    model: String,
    seed: Option<u64>,
}

impl OpenAiGenerator {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>) -> Self {
        OpenAiGenerator {
            transport: HttpTransport::new(endpoint, api_key, Duration::from_secs(120)),
            model: model.to_string(),
            seed: None,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.transport.retry = retry;
        self
    }

    /// Send a fixed `seed` field, for servers that honour one.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn settings_fingerprint(&self) -> String {
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_default();
        short_digest(format!("{}|temperature=0|seed={seed}", self.model).as_bytes())
    }
}

#[async_trait]
impl Generator for OpenAiGenerator {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            backend_id: "openai-chat".to_string(),
            kind: BackendKind::Generator,
            endpoint: Some(self.transport.endpoint.clone()),
            model_name: Some(self.model.clone()),
            // temperature 0 is requested, but servers do not guarantee it
            deterministic: false,
        }
    }

    async fn generate(&self, prompt: &str) -> Result<GeneratedResponse> {
        let body = serde_json::to_vec(&ChatRequest::user(&self.model, prompt, self.seed))?;
        let bytes = self.transport.post_json("/chat/completions", body).await?;
        let parsed: ChatResponse = serde_json::from_slice(&bytes)
            .map_err(|e| Error::BackendProtocol(format!("bad chat response: {e}")))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Error::BackendProtocol("response has no choices".into()))?
            .message
            .content
            .unwrap_or_default();
        Ok(GeneratedResponse {
            text,
            backend_id: "openai-chat".to_string(),
            settings_fingerprint: self.settings_fingerprint(),
        })
    }

    async fn health(&self) -> bool {
        self.transport.reachable().await
    }
}
