//! HTTP recommendation service over an immutable model snapshot.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::{StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use nftmine_core::ffm::{FfmEntry, FfmRow, Vocabulary};
use nftmine_core::model::{predict_batch, LoadedModel};
use nftmine_core::recommend::{recommend, CandidateOptions, Catalog};

/// Everything a request may read. Never mutated after startup.
pub struct Snapshot {
    pub model: LoadedModel,
    pub catalog: Catalog,
    pub vocab: Vocabulary,
    pub model_version: String,
    pub exclude_owned: bool,
}

impl Snapshot {
    pub fn new(model: LoadedModel, catalog: Catalog, vocab: Vocabulary) -> Self {
        let model_version = format!("v1-{:08x}", model.checksum);
        Self { model, catalog, vocab, model_version, exclude_owned: false }
    }
}

struct AppState {
    snap: Snapshot,
    errors: AtomicU64,
}

type Shared = Arc<AppState>;

fn error(status: StatusCode, code: &str, reason: impl Into<String>) -> Response {
    (status, Json(json!({ "error": code, "reason": reason.into() }))).into_response()
}

fn bad_request(reason: impl Into<String>) -> Response {
    error(StatusCode::BAD_REQUEST, "bad_request", reason)
}

fn internal(state: &AppState, reason: String) -> Response {
    let n = state.errors.fetch_add(1, Ordering::Relaxed) + 1;
    let error_id = format!("err-{n:06}");
    log::error!("{error_id}: {reason}");
    (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({ "error": "scoring_failed", "error_id": error_id }))).into_response()
}

pub fn router(snap: Snapshot) -> Router {
    let state = Arc::new(AppState { snap, errors: AtomicU64::new(0) });
    Router::new()
        .route("/recommend", get(recommend_handler))
        .route("/health", get(health))
        .route("/score", post(score))
        .fallback(not_found)
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, snap: Snapshot) -> std::io::Result<()> {
    axum::serve(listener, router(snap))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn not_found(uri: Uri) -> Response {
    error(StatusCode::NOT_FOUND, "not_found", format!("no route for {}", uri.path()))
}

async fn health(State(s): State<Shared>) -> Response {
    Json(json!({ "status": "ok", "model_version": s.snap.model_version })).into_response()
}

async fn recommend_handler(State(s): State<Shared>, query: Result<Query<BTreeMap<String, String>>, QueryRejection>) -> Response {
    let Ok(Query(q)) = query else {
        return bad_request("malformed query string");
    };
    let user = match q.get("user").map(|u| u.trim()) {
        Some(u) if !u.is_empty() => u,
        _ => return bad_request("missing parameter: user"),
    };
    let k = match q.get("k") {
        None => return bad_request("missing parameter: k"),
        Some(k) => match k.parse::<usize>() {
            Ok(k) if k >= 1 => k,
            _ => return bad_request("k must be a positive integer"),
        },
    };
    let collection = q.get("collection").map(String::as_str).filter(|c| !c.is_empty());
    let opts = CandidateOptions { collection, exclude_owned: s.snap.exclude_owned };
    let snap = &s.snap;
    match recommend(user, k, &opts, &snap.model.params, &snap.catalog, &snap.vocab) {
        Ok(rec) => Json(rec).into_response(),
        Err(e) => internal(&s, e.to_string()),
    }
}

/// A full libffm line, or an object with an `entries` list.
#[derive(Deserialize)]
#[serde(untagged)]
enum ScoreInput {
    Line(String),
    Row { entries: Vec<FfmEntry> },
}

async fn score(State(s): State<Shared>, body: Bytes) -> Response {
    let inputs: Vec<ScoreInput> = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return bad_request(format!("expected a JSON array of rows: {e}")),
    };
    let mut rows = Vec::with_capacity(inputs.len());
    for (i, input) in inputs.into_iter().enumerate() {
        let row = match input {
            ScoreInput::Line(line) => match FfmRow::parse_line(&line) {
                Ok(r) => r,
                Err(e) => return bad_request(format!("row {i}: {e}")),
            },
            ScoreInput::Row { entries } => FfmRow { label: 0, entries },
        };
        rows.push(row);
    }
    match predict_batch(&s.snap.model.params, &rows) {
        Ok(p) => Json(json!({ "probabilities": p })).into_response(),
        Err(e) => internal(&s, e.to_string()),
    }
}
