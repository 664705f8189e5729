//! Chat-completion backend contract and the HTTP implementation.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::{post_json, BackendError};

/// Agent roles. Every system prompt starts with `#role: <name>` so that
/// backends (the mock in particular) can tell roles apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    FactAggregator,
    JudgeAssistant,
    IssueJudge,
    LawPrecedentJudge,
    DeliberationJudge,
    AraSelector,
}

pub const ROLE_MARKER_PREFIX: &str = "#role:";

impl AgentRole {
    pub const ALL: [AgentRole; 6] = [
        AgentRole::FactAggregator,
        AgentRole::JudgeAssistant,
        AgentRole::IssueJudge,
        AgentRole::LawPrecedentJudge,
        AgentRole::DeliberationJudge,
        AgentRole::AraSelector,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::FactAggregator => "fact_aggregator",
            AgentRole::JudgeAssistant => "judge_assistant",
            AgentRole::IssueJudge => "issue_judge",
            AgentRole::LawPrecedentJudge => "law_precedent_judge",
            AgentRole::DeliberationJudge => "deliberation_judge",
            AgentRole::AraSelector => "ara_selector",
        }
    }

    /// Reads the role marker from the first line of a system prompt.
    pub fn from_system_prompt(system_prompt: &str) -> Option<AgentRole> {
        let first = system_prompt.lines().next()?.trim();
        first.strip_prefix(ROLE_MARKER_PREFIX)?.trim().parse().ok()
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown agent role {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub system_prompt: String,
    pub user_message: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

/// A chat-completion model. One call, one text answer.
///
/// Implementations must tolerate concurrent calls.
pub trait LlmBackend: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, exchange: &ChatExchange) -> Result<String, BackendError>;
}

/// Chat completion over HTTP: POST `{"system","user","temperature","max_tokens"}`
/// and read `{"text"}` back.
#[derive(Debug, Clone)]
pub struct HttpLlm {
    endpoint: String,
    api_key: Option<String>,
    timeout: Duration,
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    system: &'a str,
    user: &'a str,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

impl HttpLlm {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key,
            timeout,
        }
    }
}

impl LlmBackend for HttpLlm {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&self, exchange: &ChatExchange) -> Result<String, BackendError> {
        let request = CompletionRequest {
            system: &exchange.system_prompt,
            user: &exchange.user_message,
            temperature: exchange.temperature,
            max_tokens: exchange.max_output_tokens,
        };
        let resp: CompletionResponse =
            post_json(&self.endpoint, self.api_key.as_deref(), self.timeout, &request)?;
        Ok(resp.text)
    }
}
