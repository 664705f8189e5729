//! LLM-backed agents: fact aggregation, the judge assistant, and the three
//! judges of the collegial panel.
//!
//! All roles share one backend and differ only by system prompt. Each role
//! answers with a JSON object; an answer that cannot be parsed or violates
//! the role's constraints triggers a repair re-prompt that echoes the
//! schema, up to [`AgentSettings::max_repairs`] times.

mod assistant;
mod backend;
mod facts;
mod judges;
mod structured;

pub use assistant::{assist, redact_ids, NO_SUPPORT_MARKER};
pub use backend::{AgentRole, ChatExchange, HttpLlm, LlmBackend, ROLE_MARKER_PREFIX};
pub use facts::{
    aggregate_facts, enforce_ta_priority, raw_concatenation, Conflict, ElementKind, FactAggregation, FactElement,
    FactStatement, Resolution, Source,
};
pub use judges::{
    deliberation_judge, finalize_statutes, issue_judge, law_precedent_judge, single_judge_final, AraSelection,
    DeliberationOutput, FinalJudgment, PreliminaryJudgment, ReportSections, RevisionSuggestions,
};
pub use structured::{parse_structured_output, schema_hint};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::backend::BackendError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AgentError {
    #[error("{role}: backend failed after {attempts} attempt(s): {source}")]
    Backend {
        role: AgentRole,
        attempts: usize,
        #[source]
        source: BackendError,
    },
    #[error("{role}: no valid structured output after {attempts} attempt(s): {reason}")]
    StructuredOutput {
        role: AgentRole,
        attempts: usize,
        reason: String,
        raw: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSettings {
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Repair re-prompts after an invalid answer.
    pub max_repairs: usize,
    /// Extra attempts after a backend failure, per call.
    pub max_retries: usize,
}

impl Default for AgentSettings {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_output_tokens: 1024,
            max_repairs: 2,
            max_retries: 1,
        }
    }
}

/// Versioned role prompt with the output schema filled in.
pub fn system_prompt(role: AgentRole) -> String {
    let template = match role {
        AgentRole::FactAggregator => include_str!("../../prompts/fact_aggregator.txt"),
        AgentRole::JudgeAssistant => include_str!("../../prompts/judge_assistant.txt"),
        AgentRole::IssueJudge => include_str!("../../prompts/issue_judge.txt"),
        AgentRole::LawPrecedentJudge => include_str!("../../prompts/law_precedent_judge.txt"),
        AgentRole::DeliberationJudge => include_str!("../../prompts/deliberation_judge.txt"),
        AgentRole::AraSelector => include_str!("../../prompts/ara_selector.txt"),
    };
    template.replace("{{SCHEMA}}", schema_hint(role))
}

fn repair_message(original: &str, attempt: usize, reason: &str, role: AgentRole) -> String {
    format!(
        "{original}\n\n[REPAIR ATTEMPT {attempt}] Your previous answer was rejected: {reason}\n\
         Reply with exactly one JSON object matching this schema:\n{}",
        schema_hint(role)
    )
}

fn complete_with_retry(
    backend: &dyn LlmBackend,
    exchange: &ChatExchange,
    role: AgentRole,
    settings: &AgentSettings,
) -> Result<String, AgentError> {
    let mut attempts = 0;
    loop {
        attempts += 1;
        match backend.complete(exchange) {
            Ok(text) => return Ok(text),
            Err(e) if attempts > settings.max_retries => {
                return Err(AgentError::Backend {
                    role,
                    attempts,
                    source: e,
                })
            }
            Err(_) => continue,
        }
    }
}

/// One structured call: send `input` to `role`, parse the answer as `T` and
/// run `check` on it, re-prompting with the rejection reason on failure.
pub(crate) fn ask<T: DeserializeOwned>(
    backend: &dyn LlmBackend,
    settings: &AgentSettings,
    role: AgentRole,
    input: &Value,
    check: impl Fn(&T) -> Result<(), String>,
) -> Result<T, AgentError> {
    let original = serde_json::to_string_pretty(input).expect("agent input serializes");
    let mut exchange = ChatExchange {
        system_prompt: system_prompt(role),
        user_message: original.clone(),
        max_output_tokens: settings.max_output_tokens,
        temperature: settings.temperature,
    };
    let mut last = (String::new(), String::new());
    for attempt in 0..=settings.max_repairs {
        if attempt > 0 {
            exchange.user_message = repair_message(&original, attempt, &last.0, role);
        }
        let raw = complete_with_retry(backend, &exchange, role, settings)?;
        match parse_structured_output::<T>(&raw).and_then(|v| check(&v).map(|_| v)) {
            Ok(v) => return Ok(v),
            Err(reason) => last = (reason, raw),
        }
    }
    Err(AgentError::StructuredOutput {
        role,
        attempts: settings.max_repairs + 1,
        reason: last.0,
        raw: last.1,
    })
}

fn dedup_preserving_order(ids: &mut Vec<String>) {
    let mut seen = std::collections::BTreeSet::new();
    ids.retain(|id| seen.insert(id.clone()));
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    struct Scripted {
        replies: Mutex<Vec<Result<String, BackendError>>>,
        calls: AtomicUsize,
        seen: Mutex<Vec<String>>,
    }

    impl Scripted {
        fn new(mut replies: Vec<Result<String, BackendError>>) -> Self {
            replies.reverse();
            Self {
                replies: Mutex::new(replies),
                calls: AtomicUsize::new(0),
                seen: Mutex::new(Vec::new()),
            }
        }
    }

    impl LlmBackend for Scripted {
        fn name(&self) -> &str {
            "scripted"
        }

        fn complete(&self, exchange: &ChatExchange) -> Result<String, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.seen.lock().unwrap().push(exchange.user_message.clone());
            self.replies.lock().unwrap().pop().expect("script exhausted")
        }
    }

    #[derive(Debug, Deserialize)]
    struct Pick {
        selected_index: usize,
    }

    #[test]
    fn repair_after_bad_output() {
        let backend = Scripted::new(vec![Ok("no idea".into()), Ok(r#"{"selected_index": 3}"#.into())]);
        let v: Pick = ask(&backend, &AgentSettings::default(), AgentRole::AraSelector, &Value::Null, |_| Ok(())).unwrap();
        assert_eq!(v.selected_index, 3);
        let seen = backend.seen.lock().unwrap();
        assert!(seen[1].contains("[REPAIR ATTEMPT 1]"));
        assert!(seen[1].contains(schema_hint(AgentRole::AraSelector)));
    }

    #[test]
    fn repairs_exhausted() {
        let backend = Scripted::new(vec![Ok("a".into()), Ok("b".into()), Ok("c".into())]);
        let err = ask::<Pick>(&backend, &AgentSettings::default(), AgentRole::AraSelector, &Value::Null, |_| Ok(()))
            .unwrap_err();
        assert!(matches!(err, AgentError::StructuredOutput { attempts: 3, ref raw, .. } if raw == "c"));
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn check_failure_triggers_repair() {
        let backend = Scripted::new(vec![Ok(r#"{"selected_index": 9}"#.into()), Ok(r#"{"selected_index": 1}"#.into())]);
        let v: Pick = ask(&backend, &AgentSettings::default(), AgentRole::AraSelector, &Value::Null, |p: &Pick| {
            if p.selected_index < 4 {
                Ok(())
            } else {
                Err("out of range".into())
            }
        })
        .unwrap();
        assert_eq!(v.selected_index, 1);
    }

    #[test]
    fn backend_retry_then_failure() {
        let down = || {
            Err(BackendError::Transport {
                endpoint: "x".into(),
                message: "refused".into(),
            })
        };
        let backend = Scripted::new(vec![down(), Ok(r#"{"selected_index": 0}"#.into())]);
        assert!(ask::<Pick>(&backend, &AgentSettings::default(), AgentRole::AraSelector, &Value::Null, |_| Ok(())).is_ok());

        let backend = Scripted::new(vec![down(), down()]);
        let err = ask::<Pick>(&backend, &AgentSettings::default(), AgentRole::AraSelector, &Value::Null, |_| Ok(()))
            .unwrap_err();
        assert!(matches!(err, AgentError::Backend { attempts: 2, .. }));
    }

    #[test]
    fn prompts_carry_markers_and_schema() {
        for role in AgentRole::ALL {
            let prompt = system_prompt(role);
            assert_eq!(AgentRole::from_system_prompt(&prompt), Some(role));
            assert!(prompt.contains(schema_hint(role)));
            assert!(!prompt.contains("{{SCHEMA}}"));
        }
    }
}
