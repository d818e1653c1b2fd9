#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, post};
use axum::Router;
use parking_lot::Mutex;
use serde_json::{json, Value};

pub const SKY_Q: &str = "what color is the sky";
pub const SKY_D: &str = "the sky is blue";

pub const CAPITAL_PROMPT: &str = "Answer using the context.\nContext: Paris is the capital of France. \
Berlin is the capital of Germany.\nQuestion: What is the capital of France?";

/// Term counts over lowercase alphanumeric runs, computed without the crate.
pub fn tf(text: &str) -> HashMap<String, f64> {
    let mut counts = HashMap::new();
    let mut word = String::new();
    for c in text.chars().chain(std::iter::once(' ')) {
        if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
        } else if !word.is_empty() {
            *counts.entry(std::mem::take(&mut word)).or_insert(0.0) += 1.0;
        }
    }
    counts
}

pub fn tf_cosine(a: &str, b: &str) -> f64 {
    let (x, y) = (tf(a), tf(b));
    let dot: f64 = x.iter().map(|(k, v)| v * y.get(k).copied().unwrap_or(0.0)).sum();
    let nx = x.values().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.values().map(|v| v * v).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        dot / (nx * ny)
    }
}

/// Leave-one-word-out by splitting on single spaces and rejoining.
pub fn brute_retrieval(question: &str, document: &str) -> (f64, Vec<(String, f64, f64)>) {
    let words: Vec<&str> = document.split(' ').collect();
    let s_d = tf_cosine(question, document);
    let mut out = Vec::new();
    for i in 0..words.len() {
        let rest: Vec<&str> = words.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, w)| *w).collect();
        let s_i = tf_cosine(question, &rest.join(" "));
        out.push((words[i].to_string(), s_i, s_d - s_i));
    }
    let max = out.iter().map(|(_, _, d)| *d).fold(0.0f64, f64::max);
    let weighted = out
        .into_iter()
        .map(|(w, s_i, d)| (w, s_i, if max > 0.0 && s_d > 0.0 { d.max(0.0) / max } else { 0.0 }))
        .collect();
    (s_d, weighted)
}

/// Indices ordered by weight descending, then index ascending.
pub fn oracle_ranking(weights: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap().then(a.cmp(&b)));
    idx
}

#[derive(Debug, Clone)]
pub struct Recorded {
    pub path: String,
    pub body: Bytes,
    pub authorization: Option<String>,
}

#[derive(Default)]
struct MockState {
    requests: Mutex<Vec<Recorded>>,
    script: Mutex<VecDeque<u16>>,
    reply: Mutex<String>,
}

/// OpenAI-compatible server that records every request body verbatim.
///
/// Queued status codes are answered first, one per request; after that
/// embeddings get `[chars, vowels, 1]` vectors and chat gets the reply text.
pub struct MockOpenAi {
    pub addr: SocketAddr,
    state: Arc<MockState>,
}

impl MockOpenAi {
    pub async fn start() -> Self {
        let state = Arc::new(MockState::default());
        *state.reply.lock() = "mock reply".to_string();
        let app = Router::new()
            .route("/v1/embeddings", post(embeddings))
            .route("/v1/chat/completions", post(chat))
            .route("/v1/models", get(|| async { axum::Json(json!({"data": []})) }))
            .with_state(state.clone());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        MockOpenAi { addr, state }
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn fail_next(&self, statuses: &[u16]) {
        self.state.script.lock().extend(statuses.iter().copied());
    }

    pub fn set_reply(&self, text: &str) {
        *self.state.reply.lock() = text.to_string();
    }

    pub fn requests(&self) -> Vec<Recorded> {
        self.state.requests.lock().clone()
    }

    pub fn clear(&self) {
        self.state.requests.lock().clear();
    }
}

fn record(state: &MockState, path: &str, headers: &HeaderMap, body: &Bytes) -> Option<(StatusCode, String)> {
    state.requests.lock().push(Recorded {
        path: path.to_string(),
        body: body.clone(),
        authorization: headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
    });
    let status = state.script.lock().pop_front()?;
    let body = json!({"error": {"message": format!("scripted {status}")}}).to_string();
    Some((StatusCode::from_u16(status).unwrap(), body))
}

pub fn mock_vector(text: &str) -> Vec<f64> {
    let chars = text.chars().count() as f64;
    let vowels = text.chars().filter(|c| "aeiou".contains(*c)).count() as f64;
    vec![chars, vowels, 1.0]
}

async fn embeddings(State(state): State<Arc<MockState>>, headers: HeaderMap, body: Bytes) -> (StatusCode, String) {
    if let Some(fail) = record(&state, "/embeddings", &headers, &body) {
        return fail;
    }
    let req: Value = serde_json::from_slice(&body).unwrap();
    let data: Vec<Value> = req["input"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
        .rev()
        .map(|(i, t)| json!({"object": "embedding", "index": i, "embedding": mock_vector(t.as_str().unwrap())}))
        .collect();
    (StatusCode::OK, json!({"object": "list", "data": data}).to_string())
}

async fn chat(State(state): State<Arc<MockState>>, headers: HeaderMap, body: Bytes) -> (StatusCode, String) {
    if let Some(fail) = record(&state, "/chat/completions", &headers, &body) {
        return fail;
    }
    let reply = state.reply.lock().clone();
    (
        StatusCode::OK,
        json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": reply}}]}).to_string(),
    )
}
