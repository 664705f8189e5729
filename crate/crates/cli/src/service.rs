//! JSON-over-HTTP front end. One pipeline run per request, over an engine
//! shared read-only between requests.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dashjudge_core::corpus::{CaseRecord, ModeId};
use dashjudge_core::pipeline::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Semaphore;

use crate::derived_case_id;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeRequest {
    pub accident_text: String,
    #[serde(default)]
    pub video_description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeResponse {
    pub final_mode: ModeId,
    pub statute_ids: Vec<String>,
    pub report: String,
    pub trace_id: String,
}

#[derive(Clone)]
struct AppState {
    engine: Engine,
    permits: Arc<Semaphore>,
}

/// Routes for the service; at most `max_concurrency` pipelines run at once
/// and further requests wait for a slot.
pub fn router(engine: Engine, max_concurrency: usize) -> Router {
    let state = AppState {
        engine,
        permits: Arc::new(Semaphore::new(max_concurrency.max(1))),
    };
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/judge", post(judge))
        .with_state(state)
}

fn error(status: StatusCode, kind: &str, detail: impl Into<String>) -> Response {
    (status, Json(json!({"error": kind, "detail": detail.into()}))).into_response()
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn judge(State(state): State<AppState>, body: Bytes) -> Response {
    let request: JudgeRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, "malformed_request", e.to_string()),
    };
    let case_id = derived_case_id(&request.accident_text, &request.video_description);
    let case = CaseRecord::new(case_id, request.accident_text).with_video(request.video_description);
    if let Err(e) = case.validate() {
        return error(StatusCode::BAD_REQUEST, "invalid_case", e);
    }

    let Ok(_permit) = state.permits.clone().acquire_owned().await else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "shutting_down", "service is shutting down");
    };
    let engine = state.engine.clone();
    let outcome = match tokio::task::spawn_blocking(move || engine.run_case(&case)).await {
        Ok(o) => o,
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
    };
    match outcome {
        Ok(report) => Json(JudgeResponse {
            final_mode: report.judgment.final_mode,
            statute_ids: report.judgment.final_statute_ids,
            report: report.text,
            trace_id: report.trace.trace_id,
        })
        .into_response(),
        Err(f) if f.error.is_backend() => error(StatusCode::BAD_GATEWAY, "backend_failure", f.to_string()),
        Err(f) => error(StatusCode::BAD_REQUEST, "invalid_case", f.to_string()),
    }
}
