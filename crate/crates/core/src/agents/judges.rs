//! The collegial panel: Issue Judge, Law & Precedent Judge and
//! Deliberation Judge.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ask, dedup_preserving_order, AgentError, AgentRole, AgentSettings, FactStatement, LlmBackend};
use crate::corpus::{KnowledgeBase, ModeId};
use crate::retrieval::LegalSummary;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreliminaryJudgment {
    pub liability_allocation: String,
    pub predicted_mode: ModeId,
    pub statute_ids: Vec<String>,
    #[serde(default)]
    pub issues: Vec<String>,
    pub reasoning: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionSuggestions {
    #[serde(default)]
    pub statute_additions: Vec<String>,
    #[serde(default)]
    pub statute_removals: Vec<String>,
    #[serde(default)]
    pub liability_revision: Option<String>,
    #[serde(default)]
    pub mode_override: Option<ModeId>,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSections {
    pub facts: String,
    pub issues: String,
    pub statute_analysis: String,
    pub precedent_analysis: String,
    pub liability_determination: String,
    pub decision: String,
}

impl ReportSections {
    pub fn titled(&self) -> [(&'static str, &str); 6] {
        [
            ("Facts", &self.facts),
            ("Issues", &self.issues),
            ("Statute Analysis", &self.statute_analysis),
            ("Precedent Analysis", &self.precedent_analysis),
            ("Liability Determination", &self.liability_determination),
            ("Decision", &self.decision),
        ]
    }
}

/// The Deliberation Judge's raw answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliberationOutput {
    pub final_mode: ModeId,
    #[serde(default)]
    pub final_statute_ids: Vec<String>,
    #[serde(default)]
    pub deviation_justification: Option<String>,
    pub report: ReportSections,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalJudgment {
    pub case_id: String,
    pub final_mode: ModeId,
    pub final_statute_ids: Vec<String>,
    pub report: ReportSections,
    /// The statute set was replaced by the mode-bound statutes because
    /// nothing resolvable was left.
    pub fallback_applied: bool,
    pub deviations: Vec<String>,
    pub trace_refs: Vec<String>,
}

/// Answer of the accident-reason selector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AraSelection {
    pub selected_index: usize,
    #[serde(default)]
    pub rationale: String,
}

fn mode_catalogue(kb: &KnowledgeBase) -> Value {
    kb.modes
        .modes()
        .iter()
        .map(|m| json!({"mode_id": m.mode_id, "name": m.name, "definition": m.definition}))
        .collect()
}

/// Keeps corpus statutes only, deduplicated in order. Falls back to the
/// mode's full statute set when nothing survives; the flag reports that.
pub fn finalize_statutes(candidates: &[String], mode: ModeId, kb: &KnowledgeBase) -> (Vec<String>, bool) {
    let mut ids: Vec<String> = candidates
        .iter()
        .filter(|id| kb.corpus.statute(id).is_some())
        .cloned()
        .collect();
    dedup_preserving_order(&mut ids);
    if ids.is_empty() {
        (kb.modes.binding(mode).full.to_vec(), true)
    } else {
        (ids, false)
    }
}

/// Preliminary judgment from the facts alone. `digest` is only passed when
/// the panel is reduced to a single judge.
pub fn issue_judge(
    fact: &FactStatement,
    kb: &KnowledgeBase,
    digest: Option<&str>,
    backend: &dyn LlmBackend,
    settings: &AgentSettings,
) -> Result<PreliminaryJudgment, AgentError> {
    let mut input = json!({
        "case_id": fact.case_id,
        "fact_statement": fact.narrative,
        "responsibility_modes": mode_catalogue(kb),
    });
    if let Some(d) = digest {
        input["legal_digest"] = Value::String(d.to_string());
    }
    let mut prelim: PreliminaryJudgment =
        ask(backend, settings, AgentRole::IssueJudge, &input, |p: &PreliminaryJudgment| {
            if p.statute_ids.iter().all(|s| s.trim().is_empty()) {
                Err("statute_ids must list at least one provision".into())
            } else if p.reasoning.trim().is_empty() {
                Err("reasoning must not be empty".into())
            } else if p.liability_allocation.trim().is_empty() {
                Err("liability_allocation must not be empty".into())
            } else {
                Ok(())
            }
        })?;
    prelim.statute_ids.retain(|s| !s.trim().is_empty());
    dedup_preserving_order(&mut prelim.statute_ids);
    Ok(prelim)
}

/// Reviews the preliminary judgment against the retrieved statutes and
/// precedents.
///
/// Whatever the model says, additions are restricted to the summary's
/// statute pool, removals to the preliminary statutes, and every
/// preliminary id unknown to the corpus is removed.
pub fn law_precedent_judge(
    fact: &FactStatement,
    prelim: &PreliminaryJudgment,
    digest: &str,
    summary: &LegalSummary,
    kb: &KnowledgeBase,
    backend: &dyn LlmBackend,
    settings: &AgentSettings,
) -> Result<RevisionSuggestions, AgentError> {
    let pool = summary.statute_ids();
    let input = json!({
        "case_id": fact.case_id,
        "fact_statement": fact.narrative,
        "preliminary_judgment": prelim,
        "legal_digest": digest,
        "candidate_statute_ids": pool,
    });
    let mut rev: RevisionSuggestions = ask(backend, settings, AgentRole::LawPrecedentJudge, &input, |_| Ok(()))?;

    let prelim_ids: BTreeSet<&str> = prelim.statute_ids.iter().map(String::as_str).collect();
    rev.statute_additions
        .retain(|id| pool.contains(id) && !prelim_ids.contains(id.as_str()));
    rev.statute_removals.retain(|id| prelim_ids.contains(id.as_str()));
    rev.statute_removals.extend(
        prelim
            .statute_ids
            .iter()
            .filter(|id| kb.corpus.statute(id).is_none())
            .cloned(),
    );
    dedup_preserving_order(&mut rev.statute_additions);
    dedup_preserving_order(&mut rev.statute_removals);
    let both: BTreeSet<String> = rev
        .statute_additions
        .iter()
        .filter(|id| rev.statute_removals.contains(id))
        .cloned()
        .collect();
    rev.statute_additions.retain(|id| !both.contains(id));
    rev.statute_removals.retain(|id| !both.contains(id));
    if rev.liability_revision.as_deref().is_some_and(|s| s.trim().is_empty()) {
        rev.liability_revision = None;
    }
    Ok(rev)
}

/// `(prelim ∖ removals) ∪ additions`, preliminary order first.
fn merged_statutes(prelim: &PreliminaryJudgment, rev: &RevisionSuggestions) -> Vec<String> {
    let mut ids: Vec<String> = prelim
        .statute_ids
        .iter()
        .filter(|id| !rev.statute_removals.contains(id))
        .chain(&rev.statute_additions)
        .cloned()
        .collect();
    dedup_preserving_order(&mut ids);
    ids
}

/// Final judgment from the preliminary judgment and the revision
/// suggestions.
///
/// The outcome is determined by the merge rule; the model may depart from
/// it only by filling `deviation_justification`, and each departure is
/// recorded in [`FinalJudgment::deviations`].
pub fn deliberation_judge(
    fact: &FactStatement,
    prelim: &PreliminaryJudgment,
    revisions: &RevisionSuggestions,
    kb: &KnowledgeBase,
    backend: &dyn LlmBackend,
    settings: &AgentSettings,
) -> Result<FinalJudgment, AgentError> {
    let expected_mode = revisions.mode_override.unwrap_or(prelim.predicted_mode);
    let merged = merged_statutes(prelim, revisions);
    let input = json!({
        "case_id": fact.case_id,
        "fact_statement": fact.narrative,
        "responsibility_modes": mode_catalogue(kb),
        "preliminary_judgment": prelim,
        "revision_suggestions": revisions,
        "expected_mode": expected_mode,
        "merged_statute_ids": merged,
    });
    let out: DeliberationOutput = ask(backend, settings, AgentRole::DeliberationJudge, &input, |o: &DeliberationOutput| {
        match o.report.titled().iter().find(|(_, body)| body.trim().is_empty()) {
            Some((title, _)) => Err(format!("report section {title:?} is empty")),
            None => Ok(()),
        }
    })?;

    let justification = out
        .deviation_justification
        .as_deref()
        .map(str::trim)
        .filter(|s| !s.is_empty());
    let mut deviations = Vec::new();

    let final_mode = match justification {
        Some(why) if out.final_mode != expected_mode => {
            deviations.push(format!(
                "final mode {} instead of {expected_mode}: {why}",
                out.final_mode
            ));
            out.final_mode
        }
        _ => expected_mode,
    };

    let as_set = |v: &[String]| v.iter().cloned().collect::<BTreeSet<_>>();
    let chosen = match justification {
        Some(why) if as_set(&out.final_statute_ids) != as_set(&merged) => {
            deviations.push(format!(
                "statutes [{}] instead of merged [{}]: {why}",
                out.final_statute_ids.join(", "),
                merged.join(", ")
            ));
            out.final_statute_ids.clone()
        }
        _ => merged,
    };
    let (final_statute_ids, fallback_applied) = finalize_statutes(&chosen, final_mode, kb);

    Ok(FinalJudgment {
        case_id: fact.case_id.clone(),
        final_mode,
        final_statute_ids,
        report: out.report,
        fallback_applied,
        deviations,
        trace_refs: Vec::new(),
    })
}

/// Final judgment when the panel is reduced to the Issue Judge: its mode and
/// statutes pass through closed-world validation and fallback unchanged.
pub fn single_judge_final(fact: &FactStatement, prelim: &PreliminaryJudgment, kb: &KnowledgeBase) -> FinalJudgment {
    let (final_statute_ids, fallback_applied) = finalize_statutes(&prelim.statute_ids, prelim.predicted_mode, kb);
    let issues = if prelim.issues.is_empty() {
        prelim.reasoning.clone()
    } else {
        prelim.issues.join("; ")
    };
    FinalJudgment {
        case_id: fact.case_id.clone(),
        final_mode: prelim.predicted_mode,
        final_statute_ids: final_statute_ids.clone(),
        report: ReportSections {
            facts: fact.narrative.clone(),
            issues,
            statute_analysis: format!("Provisions relied on: {}.", prelim.statute_ids.join(", ")),
            precedent_analysis: "Precedents were not reviewed by a separate judge.".into(),
            liability_determination: prelim.liability_allocation.clone(),
            decision: prelim.reasoning.clone(),
        },
        fallback_applied,
        deviations: Vec::new(),
        trace_refs: Vec::new(),
    }
}
