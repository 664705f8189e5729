//! JSON-in-text extraction for agent outputs.

use serde::de::DeserializeOwned;
use serde_json::Value;

use super::AgentRole;

/// Output schema for each role, echoed in prompts and repair requests.
pub fn schema_hint(role: AgentRole) -> &'static str {
    match role {
        AgentRole::FactAggregator => {
            r#"{"narrative": string, "elements": [{"kind": "vehicle_role"|"road_type"|"key_behavior"|"collision_type"|"environment_detail", "value": string, "source": "Ta"|"Tv"|"merged"}], "conflicts": [{"element_kind": <element kind>, "ta_value": string, "tv_value": string}]}"#
        }
        AgentRole::JudgeAssistant => r#"{"cited_ids": [string], "analysis": string}"#,
        AgentRole::IssueJudge => {
            r#"{"liability_allocation": string, "predicted_mode": "RM1"|"RM2"|"RM3"|"RM4"|"RM5"|"RM6", "statute_ids": [string, ...non-empty], "issues": [string], "reasoning": string}"#
        }
        AgentRole::LawPrecedentJudge => {
            r#"{"statute_additions": [string], "statute_removals": [string], "liability_revision": string|null, "mode_override": "RM1".."RM6"|null, "rationale": string}"#
        }
        AgentRole::DeliberationJudge => {
            r#"{"final_mode": "RM1".."RM6", "final_statute_ids": [string], "deviation_justification": string|null, "report": {"facts": string, "issues": string, "statute_analysis": string, "precedent_analysis": string, "liability_determination": string, "decision": string}}"#
        }
        AgentRole::AraSelector => r#"{"selected_index": integer, "rationale": string}"#,
    }
}

/// Returns the first JSON object embedded in `raw` that deserializes into
/// `T`. Surrounding prose is ignored.
///
/// On failure the error describes why the first well-formed object was
/// rejected, which is what a repair prompt should tell the model.
pub fn parse_structured_output<T: DeserializeOwned>(raw: &str) -> Result<T, String> {
    let mut first_rejection: Option<String> = None;
    for (start, _) in raw.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
        let Some(Ok(value @ Value::Object(_))) = stream.next() else {
            continue;
        };
        match serde_json::from_value::<T>(value) {
            Ok(parsed) => return Ok(parsed),
            Err(e) => {
                first_rejection.get_or_insert_with(|| e.to_string());
            }
        }
    }
    Err(match first_rejection {
        Some(reason) => format!("JSON object does not match the schema: {reason}"),
        None => "no JSON object found in output".to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Deserialize, PartialEq)]
    struct Pick {
        selected_index: usize,
    }

    #[test]
    fn bare_object() {
        assert_eq!(parse_structured_output::<Pick>(r#"{"selected_index": 2}"#), Ok(Pick { selected_index: 2 }));
    }

    #[test]
    fn prose_wrapped_object() {
        let raw = "Sure! Here you go:\n```json\n{\"selected_index\": 1, \"rationale\": \"x {y}\"}\n```\nThanks.";
        assert_eq!(parse_structured_output::<Pick>(raw), Ok(Pick { selected_index: 1 }));
    }

    #[test]
    fn skips_non_matching_objects() {
        let raw = r#"{"note": "draft"} then {"selected_index": 0}"#;
        assert_eq!(parse_structured_output::<Pick>(raw), Ok(Pick { selected_index: 0 }));
    }

    #[test]
    fn no_braces() {
        let err = parse_structured_output::<Pick>("I pick option two").unwrap_err();
        assert!(err.contains("no JSON object"));
    }

    #[test]
    fn schema_mismatch_reported() {
        let err = parse_structured_output::<Pick>(r#"{"selected_index": "two"}"#).unwrap_err();
        assert!(err.contains("schema"), "{err}");
    }
}
