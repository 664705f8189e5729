use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::{AgentRole, ChatExchange, LlmBackend};
use crate::backend::BackendError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockEntry {
    pub role: AgentRole,
    pub match_key: String,
    pub response: String,
}

/// Scripted responses keyed by (role, match key), plus per-role default
/// templates.
///
/// Entries are tried in file order; the first entry of the right role whose
/// `match_key` occurs in the user message as a whole token wins. Otherwise
/// the role's default template is filled from the message's input JSON:
/// `{{path.to.field}}` becomes the field's string content (JSON-escaped,
/// without quotes) or, for non-strings, its compact JSON.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default)]
    pub entries: Vec<MockEntry>,
    #[serde(default)]
    pub defaults: BTreeMap<AgentRole, String>,
}

impl MockScript {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("mock script {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| BackendError::Config(format!("mock script {}: {e}", path.display())))
    }

    pub fn with_entry(mut self, role: AgentRole, match_key: impl Into<String>, response: impl Into<String>) -> Self {
        self.entries.push(MockEntry {
            role,
            match_key: match_key.into(),
            response: response.into(),
        });
        self
    }

    pub fn template(&self, role: AgentRole) -> &str {
        self.defaults
            .get(&role)
            .map(String::as_str)
            .unwrap_or_else(|| builtin_template(role))
    }
}

pub fn builtin_template(role: AgentRole) -> &'static str {
    match role {
        AgentRole::FactAggregator => {
            r#"{"narrative": "{{accident_text}}", "elements": [{"kind": "key_behavior", "value": "{{accident_text}}", "source": "Ta"}], "conflicts": []}"#
        }
        AgentRole::JudgeAssistant => {
            r#"{"cited_ids": {{statute_ids}}, "analysis": "The retrieved provisions match the {{inferred_category}} pattern of case {{case_id}}."}"#
        }
        AgentRole::IssueJudge => {
            r#"{"liability_allocation": "The parties share responsibility according to their fault.", "predicted_mode": "RM6", "statute_ids": ["rtsl-22"], "issues": ["Which party's conduct caused the collision"], "reasoning": "Default preliminary analysis for case {{case_id}}."}"#
        }
        AgentRole::LawPrecedentJudge => {
            r#"{"statute_additions": [], "statute_removals": [], "liability_revision": null, "mode_override": null, "rationale": "The preliminary provisions are consistent with the retrieved material."}"#
        }
        AgentRole::DeliberationJudge => {
            r#"{"final_mode": "{{expected_mode}}", "final_statute_ids": {{merged_statute_ids}}, "deviation_justification": null, "report": {"facts": "{{fact_statement}}", "issues": "{{preliminary_judgment.reasoning}}", "statute_analysis": "The merged provisions govern the established conduct.", "precedent_analysis": "Panel review: {{revision_suggestions.rationale}}", "liability_determination": "{{preliminary_judgment.liability_allocation}}", "decision": "Responsibility mode {{expected_mode}} is confirmed."}}"#
        }
        AgentRole::AraSelector => r#"{"selected_index": 0, "rationale": "Default selection."}"#,
    }
}

fn is_key_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '_'
}

fn contains_token(haystack: &str, key: &str) -> bool {
    if key.is_empty() {
        return false;
    }
    haystack.match_indices(key).any(|(at, _)| {
        let before = haystack[..at].chars().next_back();
        let after = haystack[at + key.len()..].chars().next();
        !before.is_some_and(is_key_char) && !after.is_some_and(is_key_char)
    })
}

fn lookup<'a>(input: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(input, |v, key| v.get(key))
}

/// Fills `{{path}}` placeholders from `input`. Missing fields become empty.
pub fn fill_template(template: &str, input: &Value) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let Some(end) = after.find("}}") else {
            out.push_str(&rest[start..]);
            return out;
        };
        let path = after[..end].trim();
        match lookup(input, path) {
            Some(Value::String(s)) => {
                let quoted = serde_json::to_string(s).expect("string serializes");
                out.push_str(&quoted[1..quoted.len() - 1]);
            }
            Some(other) => out.push_str(&other.to_string()),
            None => {}
        }
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    out
}

fn leading_json(message: &str) -> Value {
    serde_json::Deserializer::from_str(message)
        .into_iter::<Value>()
        .next()
        .and_then(Result::ok)
        .unwrap_or(Value::Null)
}

/// Deterministic scripted stand-in for a chat model.
#[derive(Debug, Default)]
pub struct MockLlm {
    script: MockScript,
    calls: AtomicUsize,
    log: Mutex<Vec<AgentRole>>,
}

impl MockLlm {
    pub fn new(script: MockScript) -> Self {
        Self {
            script,
            calls: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Number of completions served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Roles of all completions served so far, in call order.
    pub fn roles_called(&self) -> Vec<AgentRole> {
        self.log.lock().expect("mock log poisoned").clone()
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    /// The scripted answer, without recording the call.
    pub fn respond(&self, exchange: &ChatExchange) -> Result<String, BackendError> {
        let role = AgentRole::from_system_prompt(&exchange.system_prompt)
            .ok_or_else(|| BackendError::Protocol("system prompt carries no role marker".into()))?;
        if let Some(entry) = self
            .script
            .entries
            .iter()
            .find(|e| e.role == role && contains_token(&exchange.user_message, &e.match_key))
        {
            return Ok(entry.response.clone());
        }
        Ok(fill_template(self.script.template(role), &leading_json(&exchange.user_message)))
    }
}

impl LlmBackend for MockLlm {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, exchange: &ChatExchange) -> Result<String, BackendError> {
        let reply = self.respond(exchange);
        self.calls.fetch_add(1, Ordering::SeqCst);
        if let Some(role) = AgentRole::from_system_prompt(&exchange.system_prompt) {
            self.log.lock().expect("mock log poisoned").push(role);
        }
        reply
    }
}
