//! Failure type and HTTP plumbing shared by the LLM and embedding backends.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("transport error talking to {endpoint}: {message}")]
    Transport { endpoint: String, message: String },
    #[error("{endpoint} answered HTTP {status}: {body}")]
    Status {
        endpoint: String,
        status: u16,
        body: String,
    },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
}

/// Blocking JSON POST with a global timeout and optional bearer token.
pub(crate) fn post_json<Req: Serialize, Resp: DeserializeOwned>(
    endpoint: &str,
    api_key: Option<&str>,
    timeout: Duration,
    body: &Req,
) -> Result<Resp, BackendError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let mut request = agent.post(endpoint).header("Content-Type", "application/json");
    if let Some(key) = api_key {
        request = request.header("Authorization", &format!("Bearer {key}"));
    }
    let transport = |e: ureq::Error| BackendError::Transport {
        endpoint: endpoint.to_string(),
        message: e.to_string(),
    };
    let mut response = request.send_json(body).map_err(transport)?;
    let status = response.status().as_u16();
    if !(200..300).contains(&status) {
        let body = response.body_mut().read_to_string().unwrap_or_default();
        return Err(BackendError::Status {
            endpoint: endpoint.to_string(),
            status,
            body: body.chars().take(500).collect(),
        });
    }
    response
        .body_mut()
        .read_json::<Resp>()
        .map_err(|e| BackendError::Protocol(e.to_string()))
}
