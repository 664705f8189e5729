use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageName {
    FactAggregation,
    Retrieval,
    JudgeAssistant,
    IssueJudge,
    LawPrecedentJudge,
    DeliberationJudge,
}

impl StageName {
    /// Execution order.
    pub const ALL: [StageName; 6] = [
        StageName::FactAggregation,
        StageName::Retrieval,
        StageName::JudgeAssistant,
        StageName::IssueJudge,
        StageName::LawPrecedentJudge,
        StageName::DeliberationJudge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StageName::FactAggregation => "fact_aggregation",
            StageName::Retrieval => "retrieval",
            StageName::JudgeAssistant => "judge_assistant",
            StageName::IssueJudge => "issue_judge",
            StageName::LawPrecedentJudge => "law_precedent_judge",
            StageName::DeliberationJudge => "deliberation_judge",
        }
    }
}

impl std::fmt::Display for StageName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Completed,
    /// Disabled by an ablation flag; `output` holds the substitute artifact.
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: StageName,
    pub status: StageStatus,
    /// SHA-256 of the stage input, serialized as compact JSON.
    pub input_digest: String,
    pub output: Value,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLog {
    pub trace_id: String,
    pub case_id: String,
    pub config: Value,
    pub stages: Vec<StageRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_value(value: &Value) -> String {
    sha256_hex(value.to_string().as_bytes())
}

impl TraceLog {
    /// `trace_id` is derived from the case input and `id_seed`, so
    /// identical runs carry identical ids.
    pub fn new(case_input: &Value, config: Value, id_seed: &Value) -> Self {
        let case_id = case_input
            .get("case_id")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        let seed = serde_json::json!({"case": case_input, "config": id_seed});
        let trace_id = digest_value(&seed)[..16].to_string();
        Self {
            trace_id,
            case_id,
            config,
            stages: Vec::new(),
        }
    }

    pub fn record(&mut self, stage: StageName, status: StageStatus, input: &Value, output: Value, wall_time_ms: f64) {
        self.stages.push(StageRecord {
            stage,
            status,
            input_digest: digest_value(input),
            output,
            wall_time_ms,
        });
    }

    pub fn stage(&self, stage: StageName) -> Option<&StageRecord> {
        self.stages.iter().find(|r| r.stage == stage)
    }

    pub fn reference(&self, stage: StageName) -> String {
        format!("{}#{}", self.trace_id, stage)
    }

    /// References to every stage that actually ran.
    pub fn completed_refs(&self) -> Vec<String> {
        self.stages
            .iter()
            .filter(|r| r.status == StageStatus::Completed)
            .map(|r| self.reference(r.stage))
            .collect()
    }

    /// True when `reference` names this trace and one of its stages.
    pub fn resolves(&self, reference: &str) -> bool {
        reference
            .split_once('#')
            .is_some_and(|(id, stage)| id == self.trace_id && self.stages.iter().any(|r| r.stage.as_str() == stage))
    }

    /// True when the recorded stages follow the execution order.
    pub fn is_ordered(&self) -> bool {
        self.stages.windows(2).all(|w| w[0].stage < w[1].stage)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

/// Measures a stage when timings are on; reports zero otherwise.
pub(crate) struct StageClock {
    start: Option<Instant>,
}

impl StageClock {
    pub(crate) fn start(enabled: bool) -> Self {
        Self {
            start: enabled.then(Instant::now),
        }
    }

    pub(crate) fn elapsed_ms(&self) -> f64 {
        self.start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1000.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sha256_reference_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn trace_id_is_deterministic() {
        let a = TraceLog::new(&json!({"case_id": "c1", "accident_text": "x"}), json!({}), &json!(1));
        let b = TraceLog::new(&json!({"case_id": "c1", "accident_text": "x"}), json!({}), &json!(1));
        let c = TraceLog::new(&json!({"case_id": "c1", "accident_text": "y"}), json!({}), &json!(1));
        assert_eq!(a.trace_id, b.trace_id);
        assert_ne!(a.trace_id, c.trace_id);
        assert_eq!(a.case_id, "c1");
    }

    #[test]
    fn references_resolve() {
        let mut t = TraceLog::new(&json!({"case_id": "c1"}), json!({}), &json!(1));
        t.record(StageName::Retrieval, StageStatus::Completed, &json!(1), json!(null), 0.0);
        t.record(StageName::IssueJudge, StageStatus::Skipped, &json!(2), json!(null), 0.0);
        assert_eq!(t.completed_refs(), vec![format!("{}#retrieval", t.trace_id)]);
        assert!(t.resolves(&t.reference(StageName::IssueJudge)));
        assert!(!t.resolves(&t.reference(StageName::DeliberationJudge)));
        assert!(!t.resolves("other#retrieval"));
        assert!(t.is_ordered());
    }
}
