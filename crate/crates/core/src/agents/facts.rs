//! Confidence-aware fusion of the annotation text (Ta) and the video
//! description (Tv) into one fact statement.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ask, AgentError, AgentRole, AgentSettings, LlmBackend};
use crate::corpus::CaseRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    VehicleRole,
    RoadType,
    KeyBehavior,
    CollisionType,
    EnvironmentDetail,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::VehicleRole => "vehicle_role",
            ElementKind::RoadType => "road_type",
            ElementKind::KeyBehavior => "key_behavior",
            ElementKind::CollisionType => "collision_type",
            ElementKind::EnvironmentDetail => "environment_detail",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Ta,
    Tv,
    #[serde(rename = "merged")]
    Merged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactElement {
    pub kind: ElementKind,
    pub value: String,
    pub source: Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    #[serde(rename = "Ta-priority")]
    TaPriority,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub element_kind: ElementKind,
    pub ta_value: String,
    pub tv_value: String,
    pub resolution: Resolution,
}

/// The unified case fact statement every downstream stage works from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactStatement {
    pub case_id: String,
    pub narrative: String,
    pub elements: Vec<FactElement>,
    pub conflicts: Vec<Conflict>,
}

impl FactStatement {
    /// A statement that is just the given text, with no extracted elements.
    pub fn from_raw(case_id: &str, text: &str) -> Self {
        Self {
            case_id: case_id.to_string(),
            narrative: text.to_string(),
            elements: Vec::new(),
            conflicts: Vec::new(),
        }
    }

    /// Narrative plus element values; the text used as a retrieval query.
    pub fn retrieval_text(&self) -> String {
        let mut text = self.narrative.clone();
        for e in &self.elements {
            text.push('\n');
            text.push_str(&e.value);
        }
        text
    }
}

/// `Ta`, or `Ta\n\nTv` when a video description is present. Used when fact
/// aggregation is switched off.
pub fn raw_concatenation(accident_text: &str, video_description: &str) -> String {
    if video_description.trim().is_empty() {
        accident_text.to_string()
    } else {
        format!("{accident_text}\n\n{video_description}")
    }
}

/// What the fact aggregation agent is asked to return.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactAggregation {
    pub narrative: String,
    #[serde(default)]
    pub elements: Vec<FactElement>,
    #[serde(default)]
    pub conflicts: Vec<ConflictClaim>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictClaim {
    pub element_kind: ElementKind,
    pub ta_value: String,
    pub tv_value: String,
}

fn contains_ci(haystack: &str, needle: &str) -> bool {
    !needle.trim().is_empty() && haystack.to_lowercase().contains(&needle.trim().to_lowercase())
}

/// Applies the Ta-priority policy to an agent answer, independent of how
/// well the agent followed its instructions:
///
/// * with no video description, nothing may be sourced from Tv;
/// * for every element kind with a recorded conflict, Tv and merged values
///   of that kind are dropped;
/// * a narrative that repeats a conflicting Tv claim is rebuilt from Ta and
///   the surviving elements.
pub fn enforce_ta_priority(case: &CaseRecord, output: FactAggregation) -> FactStatement {
    let tv_empty = case.video_description.trim().is_empty();
    let conflicts: Vec<Conflict> = if tv_empty {
        Vec::new()
    } else {
        output
            .conflicts
            .into_iter()
            .filter(|c| !c.tv_value.trim().is_empty())
            .map(|c| Conflict {
                element_kind: c.element_kind,
                ta_value: c.ta_value,
                tv_value: c.tv_value,
                resolution: Resolution::TaPriority,
            })
            .collect()
    };

    let mut elements = Vec::new();
    for mut e in output.elements {
        if e.value.trim().is_empty() {
            continue;
        }
        if tv_empty {
            match e.source {
                Source::Tv => continue,
                Source::Merged => e.source = Source::Ta,
                Source::Ta => {}
            }
        } else if e.source != Source::Ta {
            let contested = conflicts
                .iter()
                .any(|c| c.element_kind == e.kind || contains_ci(&e.value, &c.tv_value));
            if contested {
                continue;
            }
        }
        if !elements.contains(&e) {
            elements.push(e);
        }
    }

    let leaks_conflict = conflicts.iter().any(|c| contains_ci(&output.narrative, &c.tv_value));
    let narrative = if output.narrative.trim().is_empty() || leaks_conflict {
        rebuild_narrative(&case.accident_text, &elements)
    } else {
        output.narrative
    };

    FactStatement {
        case_id: case.case_id.clone(),
        narrative,
        elements,
        conflicts,
    }
}

fn rebuild_narrative(accident_text: &str, elements: &[FactElement]) -> String {
    let extra: Vec<String> = elements
        .iter()
        .filter(|e| e.source != Source::Ta)
        .map(|e| format!("{}: {}", e.kind.as_str(), e.value))
        .collect();
    if extra.is_empty() {
        accident_text.trim().to_string()
    } else {
        format!("{}\nSupplementary details: {}.", accident_text.trim(), extra.join("; "))
    }
}

/// Runs the fact aggregation agent on a case and enforces Ta priority on
/// its answer.
pub fn aggregate_facts(
    case: &CaseRecord,
    backend: &dyn LlmBackend,
    settings: &AgentSettings,
) -> Result<FactStatement, AgentError> {
    let input = json!({
        "case_id": case.case_id,
        "accident_text": case.accident_text,
        "video_description": case.video_description,
    });
    let output: FactAggregation = ask(backend, settings, AgentRole::FactAggregator, &input, |_| Ok(()))?;
    Ok(enforce_ta_priority(case, output))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn el(kind: ElementKind, value: &str, source: Source) -> FactElement {
        FactElement {
            kind,
            value: value.into(),
            source,
        }
    }

    #[test]
    fn empty_video_means_ta_only() {
        let case = CaseRecord::new("c", "ego rear-ended a truck");
        let out = FactAggregation {
            narrative: "ego rear-ended a truck in the rain".into(),
            elements: vec![
                el(ElementKind::CollisionType, "rear-end", Source::Ta),
                el(ElementKind::EnvironmentDetail, "rain", Source::Tv),
                el(ElementKind::RoadType, "highway", Source::Merged),
            ],
            conflicts: vec![ConflictClaim {
                element_kind: ElementKind::KeyBehavior,
                ta_value: "a".into(),
                tv_value: "b".into(),
            }],
        };
        let fact = enforce_ta_priority(&case, out);
        assert!(fact.conflicts.is_empty());
        assert!(fact.elements.iter().all(|e| e.source == Source::Ta));
        assert_eq!(fact.elements.len(), 2);
    }

    #[test]
    fn conflicting_tv_claim_excluded() {
        let case = CaseRecord::new("c", "ego ran red light").with_video("signal was green; wet road surface");
        let out = FactAggregation {
            narrative: "The ego vehicle proceeded while the signal was green.".into(),
            elements: vec![
                el(ElementKind::KeyBehavior, "ran red light", Source::Ta),
                el(ElementKind::KeyBehavior, "signal was green", Source::Tv),
                el(ElementKind::EnvironmentDetail, "wet road surface", Source::Tv),
            ],
            conflicts: vec![ConflictClaim {
                element_kind: ElementKind::KeyBehavior,
                ta_value: "ran red light".into(),
                tv_value: "signal was green".into(),
            }],
        };
        let fact = enforce_ta_priority(&case, out);
        assert_eq!(fact.conflicts.len(), 1);
        assert_eq!(fact.conflicts[0].resolution, Resolution::TaPriority);
        assert!(!fact.narrative.to_lowercase().contains("signal was green"));
        assert!(fact.narrative.contains("ran red light"));
        assert!(fact
            .elements
            .contains(&el(ElementKind::EnvironmentDetail, "wet road surface", Source::Tv)));
        assert!(!fact.elements.iter().any(|e| e.source == Source::Tv && e.kind == ElementKind::KeyBehavior));
    }

    #[test]
    fn concatenation_rule() {
        assert_eq!(raw_concatenation("a", ""), "a");
        assert_eq!(raw_concatenation("a", "b"), "a\n\nb");
    }

    #[test]
    fn resolution_serializes_as_label() {
        assert_eq!(serde_json::to_string(&Resolution::TaPriority).unwrap(), "\"Ta-priority\"");
        assert_eq!(serde_json::to_string(&Source::Merged).unwrap(), "\"merged\"");
    }
}
