//! Judge assistant: turns the legal summary into a digest for the judges.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ask, dedup_preserving_order, AgentError, AgentRole, AgentSettings, FactStatement, LlmBackend};
use crate::corpus::KnowledgeBase;
use crate::retrieval::LegalSummary;

pub const NO_SUPPORT_MARKER: &str = "No external legal support found for this case.";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AssistantOutput {
    #[serde(default)]
    cited_ids: Vec<String>,
    analysis: String,
}

fn is_id_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '_' || c == '.'
}

/// Replaces whole-token occurrences of any id in `forbidden` with
/// `[uncited]`. Longer ids are handled first so that prefixes do not match
/// inside them.
pub fn redact_ids(text: &str, forbidden: &[&str]) -> String {
    let mut ids: Vec<&str> = forbidden.iter().copied().filter(|id| !id.is_empty()).collect();
    ids.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    let mut out = text.to_string();
    for id in ids {
        let mut result = String::with_capacity(out.len());
        let mut rest = out.as_str();
        while let Some(at) = rest.find(id) {
            let before_ok = rest[..at].chars().next_back().is_none_or(|c| !is_id_char(c));
            let after = &rest[at + id.len()..];
            let after_ok = after
                .chars()
                .next()
                .is_none_or(|c| !(c.is_alphanumeric() || c == '-' || c == '_'));
            result.push_str(&rest[..at]);
            if before_ok && after_ok {
                result.push_str("[uncited]");
            } else {
                result.push_str(id);
            }
            rest = after;
        }
        result.push_str(rest);
        out = result;
    }
    out
}

/// Produces the assistant digest. Only ids present in `summary` are ever
/// cited; an empty summary short-circuits without a backend call.
pub fn assist(
    fact: &FactStatement,
    summary: &LegalSummary,
    kb: &KnowledgeBase,
    backend: &dyn LlmBackend,
    settings: &AgentSettings,
) -> Result<String, AgentError> {
    let mut digest = String::new();
    let _ = writeln!(digest, "JUDGE ASSISTANT DIGEST");
    let _ = writeln!(digest, "inferred category: {}", summary.inferred_category);
    if summary.is_empty() {
        let _ = writeln!(digest, "{NO_SUPPORT_MARKER}");
        return Ok(digest);
    }

    let statute_ids = summary.statute_ids();
    let precedent_ids = summary.precedent_ids();
    let input = json!({
        "case_id": fact.case_id,
        "fact_statement": fact.narrative,
        "inferred_category": summary.inferred_category,
        "statute_ids": statute_ids,
        "precedent_ids": precedent_ids,
        "legal_summary": summary.compiled_text,
    });
    let output: AssistantOutput = ask(backend, settings, AgentRole::JudgeAssistant, &input, |o: &AssistantOutput| {
        if o.analysis.trim().is_empty() {
            Err("analysis must not be empty".into())
        } else {
            Ok(())
        }
    })?;

    let allowed: BTreeSet<&str> = statute_ids.iter().chain(&precedent_ids).map(String::as_str).collect();
    let mut cited: Vec<String> = output
        .cited_ids
        .into_iter()
        .filter(|id| allowed.contains(id.as_str()))
        .collect();
    dedup_preserving_order(&mut cited);
    let forbidden: Vec<&str> = kb
        .corpus
        .statutes()
        .map(|s| s.id.as_str())
        .chain(kb.corpus.precedents().map(|p| p.id.as_str()))
        .filter(|id| !allowed.contains(id))
        .collect();
    let analysis = redact_ids(output.analysis.trim(), &forbidden);

    let (cited_statutes, cited_precedents): (Vec<String>, Vec<String>) =
        cited.into_iter().partition(|id| statute_ids.contains(id));
    let _ = writeln!(digest, "cited statutes: {}", list_or_none(&cited_statutes));
    let _ = writeln!(digest, "cited precedents: {}", list_or_none(&cited_precedents));
    let _ = writeln!(digest, "analysis: {analysis}");
    digest.push('\n');
    digest.push_str(&summary.compiled_text);
    Ok(digest)
}

fn list_or_none(ids: &[String]) -> String {
    if ids.is_empty() {
        "(none)".into()
    } else {
        ids.join(", ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn redaction_respects_token_boundaries() {
        let text = "See rtsl-43 and rtsl-4, not rtsl-430 or xrtsl-4.";
        assert_eq!(
            redact_ids(text, &["rtsl-4"]),
            "See rtsl-43 and [uncited], not rtsl-430 or xrtsl-4."
        );
        assert_eq!(redact_ids("rtsl-43.", &["rtsl-43"]), "[uncited].");
    }
}
