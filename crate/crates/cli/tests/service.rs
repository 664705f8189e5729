use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use dashjudge::service::{router, JudgeResponse};
use dashjudge_core::config::{LlmKind, PipelineConfig};
use dashjudge_core::corpus::{CaseRecord, KnowledgeBase};
use dashjudge_core::pipeline::Engine;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn engine() -> Engine {
    let config = PipelineConfig::load(&fixtures().join("golden.toml")).unwrap();
    Engine::from_config(KnowledgeBase::builtin(), None, config, None).unwrap()
}

async fn send(app: Router, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::from(body.to_string()))
        .unwrap();
    let response = app.oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn health_is_ok() {
    let (status, body) = send(router(engine(), 1), "GET", "/v1/health", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"status": "ok"}));
}

#[tokio::test]
async fn judge_matches_a_direct_run() {
    let engine = engine();
    let text = "The ego car followed a lorry too closely and rear-ended it when it braked.";
    let (status, body) = send(
        router(engine.clone(), 2),
        "POST",
        "/v1/judge",
        &json!({"accident_text": text}).to_string(),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let reply: JudgeResponse = serde_json::from_value(body).unwrap();

    let case = CaseRecord::new(dashjudge::derived_case_id(text, ""), text);
    let direct = engine.run_case(&case).unwrap();
    assert_eq!(reply.final_mode, direct.judgment.final_mode);
    assert_eq!(reply.statute_ids, direct.judgment.final_statute_ids);
    assert_eq!(reply.report, direct.text);
    assert_eq!(reply.trace_id, direct.trace.trace_id);
}

#[tokio::test]
async fn malformed_bodies_are_rejected() {
    let app = router(engine(), 1);
    for body in [
        "",
        "{}",
        "[1, 2]",
        "{\"accident_text\": \"x\"",
        r#"{"accident_text": null}"#,
        r#"{"accident_text": "x", "extra": 1}"#,
        r#"{"accident_text": "   "}"#,
    ] {
        let (status, reply) = send(app.clone(), "POST", "/v1/judge", body).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body:?}");
        assert!(reply["detail"].as_str().is_some_and(|d| !d.is_empty()), "{body:?}");
    }
}

#[tokio::test]
async fn identical_bodies_get_identical_replies() {
    let app = router(engine(), 4);
    let body = json!({"accident_text": "A cyclist ran a red light.", "video_description": "Night."}).to_string();
    let (_, a) = send(app.clone(), "POST", "/v1/judge", &body).await;
    let (_, b) = send(app, "POST", "/v1/judge", &body).await;
    assert_eq!(a, b);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_stay_isolated() {
    let engine = engine();
    let app = router(engine.clone(), 3);
    let texts: Vec<String> = (0..12)
        .map(|i| format!("Case {i}: a car struck vehicle number {i} at the junction."))
        .collect();
    let handles: Vec<_> = texts
        .iter()
        .map(|t| {
            let app = app.clone();
            let body = json!({"accident_text": t}).to_string();
            tokio::spawn(async move { send(app, "POST", "/v1/judge", &body).await })
        })
        .collect();
    for (text, handle) in texts.iter().zip(handles) {
        let (status, body) = handle.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        let reply: JudgeResponse = serde_json::from_value(body).unwrap();
        let direct = engine
            .run_case(&CaseRecord::new(dashjudge::derived_case_id(text, ""), text.clone()))
            .unwrap();
        assert_eq!(reply.report, direct.text);
    }
}

#[tokio::test]
async fn backend_failure_is_bad_gateway() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut config = PipelineConfig::default();
    config.backends.llm.kind = LlmKind::Http;
    config.backends.llm.endpoint = Some(format!("http://127.0.0.1:{port}/chat"));
    config.backends.llm.timeout_secs = 2;
    let engine = Engine::from_config(KnowledgeBase::builtin(), None, config, None).unwrap();
    let (status, reply) = send(
        router(engine, 1),
        "POST",
        "/v1/judge",
        &json!({"accident_text": "A car hit a wall."}).to_string(),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(reply["error"], "backend_failure");
}
