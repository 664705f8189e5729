use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, ModeId};

/// One accident case: annotation text, video-derived description and
/// optional gold labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseRecord {
    pub case_id: String,
    pub accident_text: String,
    #[serde(default)]
    pub video_description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_mode: Option<ModeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ara_options: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_ara_index: Option<usize>,
}

impl CaseRecord {
    pub fn new(case_id: impl Into<String>, accident_text: impl Into<String>) -> Self {
        Self {
            case_id: case_id.into(),
            accident_text: accident_text.into(),
            video_description: String::new(),
            gold_mode: None,
            ara_options: None,
            gold_ara_index: None,
        }
    }

    pub fn with_video(mut self, video_description: impl Into<String>) -> Self {
        self.video_description = video_description.into();
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.case_id.trim().is_empty() {
            return Err("empty case_id".into());
        }
        if self.accident_text.trim().is_empty() {
            return Err(format!("case {}: accident_text is empty", self.case_id));
        }
        if let Some(index) = self.gold_ara_index {
            match &self.ara_options {
                None => {
                    return Err(format!(
                        "case {}: gold_ara_index given without ara_options",
                        self.case_id
                    ))
                }
                Some(options) if index >= options.len() => {
                    return Err(format!(
                        "case {}: gold_ara_index {index} out of range for {} options",
                        self.case_id,
                        options.len()
                    ))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

pub fn parse_case_dataset(text: &str, origin: &str) -> Result<Vec<CaseRecord>, CorpusError> {
    let mut seen = BTreeSet::new();
    let mut cases = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let case: CaseRecord = serde_json::from_str(line).map_err(|source| CorpusError::Json {
            origin: origin.to_string(),
            line: line_no,
            source,
        })?;
        case.validate().map_err(|message| CorpusError::InvalidRecord {
            origin: origin.to_string(),
            line: line_no,
            message,
        })?;
        if !seen.insert(case.case_id.clone()) {
            return Err(CorpusError::Duplicate {
                origin: origin.to_string(),
                line: line_no,
                id: case.case_id,
            });
        }
        cases.push(case);
    }
    Ok(cases)
}

/// Reads a JSONL case file, preserving line order.
pub fn load_case_dataset(path: &Path) -> Result<Vec<CaseRecord>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_case_dataset(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_line_file() {
        let text = r#"{"case_id":"c1","accident_text":"rear-end at lights","video_description":"","gold_mode":"RM1"}
{"case_id":"c2","accident_text":"lane change","video_description":"wet road"}"#;
        let cases = parse_case_dataset(text, "t").unwrap();
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[0].gold_mode, Some("RM1".parse().unwrap()));
        assert_eq!(cases[1].gold_mode, None);
    }

    #[test]
    fn missing_accident_text_rejected() {
        let err = parse_case_dataset(r#"{"case_id":"c1","video_description":"x"}"#, "t").unwrap_err();
        assert!(matches!(err, CorpusError::Json { line: 1, .. }));
        let err = parse_case_dataset(r#"{"case_id":"c1","accident_text":" "}"#, "t").unwrap_err();
        assert!(matches!(err, CorpusError::InvalidRecord { line: 1, .. }));
    }

    #[test]
    fn ara_index_range() {
        let ok = r#"{"case_id":"c","accident_text":"t","ara_options":["a","b","c","d"],"gold_ara_index":3}"#;
        assert_eq!(parse_case_dataset(ok, "t").unwrap().len(), 1);
        let bad = r#"{"case_id":"c","accident_text":"t","ara_options":["a","b","c","d"],"gold_ara_index":4}"#;
        assert!(parse_case_dataset(bad, "t").is_err());
        let orphan = r#"{"case_id":"c","accident_text":"t","gold_ara_index":0}"#;
        assert!(parse_case_dataset(orphan, "t").is_err());
    }

    #[test]
    fn gold_mode_outside_taxonomy_rejected() {
        let text = r#"{"case_id":"c","accident_text":"t","gold_mode":"RM7"}"#;
        assert!(parse_case_dataset(text, "t").is_err());
    }

    #[test]
    fn duplicate_case_id_rejected() {
        let text = "{\"case_id\":\"c\",\"accident_text\":\"t\"}\n{\"case_id\":\"c\",\"accident_text\":\"u\"}";
        assert!(matches!(
            parse_case_dataset(text, "t").unwrap_err(),
            CorpusError::Duplicate { line: 2, .. }
        ));
    }
}
