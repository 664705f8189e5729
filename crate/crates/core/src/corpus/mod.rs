//! Statutes, precedents, cases and the responsibility-mode taxonomy.
//!
//! Everything here is loaded once, validated, and then shared read-only.
//! Statute and precedent ids live in one namespace because both end up as
//! documents in the same retrieval index.

mod case;
mod mode;

pub use case::{load_case_dataset, parse_case_dataset, CaseRecord};
pub use mode::{load_mode_map, ModeId, ModeStatuteMap, ResponsibilityMode, StatuteBinding};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}, line {line}: {source}")]
    Json {
        origin: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{origin}, line {line}: duplicate id {id:?}")]
    Duplicate {
        origin: String,
        line: usize,
        id: String,
    },
    #[error("{origin}, line {line}: {message}")]
    InvalidRecord {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("unknown responsibility mode {0:?}")]
    UnknownMode(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CorpusError {
    /// True for problems with the input data itself (as opposed to I/O).
    pub fn is_validation(&self) -> bool {
        !matches!(self, CorpusError::Io { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Statute {
    pub id: String,
    pub law_name: String,
    pub article: String,
    pub text: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

impl Statute {
    /// Rendered citation, e.g. `Road Traffic Safety Law Art. 43`.
    pub fn citation(&self) -> String {
        format!("{} {}", self.law_name, self.article)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Precedent {
    pub id: String,
    pub title: String,
    pub fact_summary: String,
    pub holding: String,
    #[serde(default)]
    pub cited_statutes: Vec<String>,
    #[serde(default)]
    pub tags: Vec<String>,
}

/// Statutes and precedents keyed by id.
///
/// Keyed storage makes a corpus independent of input line order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    statutes: BTreeMap<String, Statute>,
    precedents: BTreeMap<String, Precedent>,
}

enum Record {
    Statute(Statute),
    Precedent(Precedent),
}

impl Record {
    fn id(&self) -> &str {
        match self {
            Record::Statute(s) => &s.id,
            Record::Precedent(p) => &p.id,
        }
    }
}

fn classify(value: Value) -> Result<Record, String> {
    let is_precedent = value
        .as_object()
        .map(|o| o.contains_key("holding") || o.contains_key("fact_summary"))
        .ok_or_else(|| "expected a JSON object".to_string())?;
    let record = if is_precedent {
        Record::Precedent(serde_json::from_value(value).map_err(|e| e.to_string())?)
    } else {
        Record::Statute(serde_json::from_value(value).map_err(|e| e.to_string())?)
    };
    match &record {
        Record::Statute(s) if s.text.trim().is_empty() => {
            Err(format!("statute {} has empty text", s.id))
        }
        r if r.id().trim().is_empty() => Err("empty id".into()),
        _ => Ok(record),
    }
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses line-delimited statute and precedent records. A line is a
    /// precedent when it carries `holding` or `fact_summary`, otherwise a
    /// statute. Blank lines are skipped.
    pub fn parse_jsonl(&mut self, text: &str, origin: &str) -> Result<(), CorpusError> {
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let value: Value = serde_json::from_str(line).map_err(|source| CorpusError::Json {
                origin: origin.to_string(),
                line: line_no,
                source,
            })?;
            let record = classify(value).map_err(|message| CorpusError::InvalidRecord {
                origin: origin.to_string(),
                line: line_no,
                message,
            })?;
            if self.contains_id(record.id()) {
                return Err(CorpusError::Duplicate {
                    origin: origin.to_string(),
                    line: line_no,
                    id: record.id().to_string(),
                });
            }
            match record {
                Record::Statute(s) => {
                    self.statutes.insert(s.id.clone(), s);
                }
                Record::Precedent(p) => {
                    self.precedents.insert(p.id.clone(), p);
                }
            }
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.parse_jsonl(&text, &path.display().to_string())
    }

    /// Every precedent citation must resolve to a loaded statute.
    pub fn check_references(&self) -> Result<(), CorpusError> {
        for p in self.precedents.values() {
            if let Some(missing) = p.cited_statutes.iter().find(|id| !self.statutes.contains_key(*id)) {
                return Err(CorpusError::Validation(format!(
                    "precedent {} cites unknown statute {missing}",
                    p.id
                )));
            }
        }
        Ok(())
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.statutes.contains_key(id) || self.precedents.contains_key(id)
    }

    pub fn statute(&self, id: &str) -> Option<&Statute> {
        self.statutes.get(id)
    }

    pub fn precedent(&self, id: &str) -> Option<&Precedent> {
        self.precedents.get(id)
    }

    /// Statutes in ascending id order.
    pub fn statutes(&self) -> impl Iterator<Item = &Statute> {
        self.statutes.values()
    }

    pub fn precedents(&self) -> impl Iterator<Item = &Precedent> {
        self.precedents.values()
    }

    pub fn statute_count(&self) -> usize {
        self.statutes.len()
    }

    pub fn precedent_count(&self) -> usize {
        self.precedents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statutes.is_empty() && self.precedents.is_empty()
    }

    /// Serializes back to JSONL, statutes first, each group in id order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in self.statutes.values() {
            out.push_str(&serde_json::to_string(s).expect("statute serializes"));
            out.push('\n');
        }
        for p in self.precedents.values() {
            out.push_str(&serde_json::to_string(p).expect("precedent serializes"));
            out.push('\n');
        }
        out
    }
}

/// Loads one JSONL file of statutes and/or precedents.
///
/// Duplicate ids are rejected with the offending line number. Cross-file
/// citation checks are left to [`Corpus::check_references`].
pub fn load_statute_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::new();
    corpus.load_file(path)?;
    Ok(corpus)
}

/// A validated corpus together with its mode taxonomy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    pub corpus: Corpus,
    pub modes: ModeStatuteMap,
}

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleDocument {
    format_version: u32,
    statutes: Vec<Statute>,
    precedents: Vec<Precedent>,
    mode_map: ModeStatuteMap,
}

impl KnowledgeBase {
    pub fn new(corpus: Corpus, modes: ModeStatuteMap) -> Result<Self, CorpusError> {
        corpus.check_references()?;
        modes.check_against(&corpus)?;
        Ok(Self { corpus, modes })
    }

    /// Loads statute/precedent JSONL files plus a mode map and validates
    /// the whole set.
    pub fn load(corpus_files: &[&Path], mode_map: &Path) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::new();
        for path in corpus_files {
            corpus.load_file(path)?;
        }
        corpus.check_references()?;
        let modes = load_mode_map(mode_map, &corpus)?;
        Self::new(corpus, modes)
    }

    /// The taxonomy and a small statute/precedent set shipped with the crate.
    pub fn builtin() -> Self {
        let mut corpus = Corpus::new();
        corpus
            .parse_jsonl(include_str!("../../assets/statutes.jsonl"), "assets/statutes.jsonl")
            .expect("shipped statutes are valid");
        corpus
            .parse_jsonl(include_str!("../../assets/precedents.jsonl"), "assets/precedents.jsonl")
            .expect("shipped precedents are valid");
        let modes = ModeStatuteMap::from_json(include_str!("../../assets/mode_map.json"))
            .expect("shipped mode map is valid");
        Self::new(corpus, modes).expect("shipped knowledge base is consistent")
    }

    /// Normalized single-document bundle written by `ingest`.
    pub fn to_bundle_json(&self) -> String {
        let doc = BundleDocument {
            format_version: BUNDLE_FORMAT_VERSION,
            statutes: self.corpus.statutes().cloned().collect(),
            precedents: self.corpus.precedents().cloned().collect(),
            mode_map: self.modes.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("bundle serializes")
    }

    pub fn from_bundle_json(text: &str) -> Result<Self, CorpusError> {
        let doc: BundleDocument = serde_json::from_str(text).map_err(|source| CorpusError::Json {
            origin: "bundle".into(),
            line: source.line(),
            source,
        })?;
        if doc.format_version != BUNDLE_FORMAT_VERSION {
            return Err(CorpusError::Validation(format!(
                "unsupported bundle format version {}",
                doc.format_version
            )));
        }
        let mut jsonl = String::new();
        for s in &doc.statutes {
            jsonl.push_str(&serde_json::to_string(s).expect("statute serializes"));
            jsonl.push('\n');
        }
        for p in &doc.precedents {
            jsonl.push_str(&serde_json::to_string(p).expect("precedent serializes"));
            jsonl.push('\n');
        }
        let mut corpus = Corpus::new();
        corpus.parse_jsonl(&jsonl, "bundle")?;
        Self::new(corpus, doc.mode_map)
    }

    pub fn load_bundle(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bundle_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE_STATUTES: &str = r#"{"id":"rtsl-43","law_name":"RTSL","article":"Art. 43","text":"keep distance","tags":["rear-end"]}
{"id":"rtsl-38","law_name":"RTSL","article":"Art. 38","text":"obey signals","tags":[]}
{"id":"rtsl-47","law_name":"RTSL","article":"Art. 47","text":"yield to pedestrians"}
"#;

    #[test]
    fn parses_three_statutes() {
        let mut corpus = Corpus::new();
        corpus.parse_jsonl(THREE_STATUTES, "t").unwrap();
        assert_eq!(corpus.statute_count(), 3);
        assert_eq!(corpus.precedent_count(), 0);
        assert!(corpus.statute("rtsl-47").unwrap().tags.is_empty());
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        let mut corpus = Corpus::new();
        corpus.parse_jsonl("", "t").unwrap();
        assert!(corpus.is_empty());
    }

    #[test]
    fn duplicate_id_names_line() {
        let text = "{\"id\":\"rtsl-43\",\"law_name\":\"L\",\"article\":\"A\",\"text\":\"x\"}\n\
                    {\"id\":\"rtsl-43\",\"law_name\":\"L\",\"article\":\"B\",\"text\":\"y\"}\n";
        let err = Corpus::new().parse_jsonl(text, "statutes.jsonl").unwrap_err();
        assert!(matches!(err, CorpusError::Duplicate { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn malformed_line_names_line() {
        let text = "{\"id\":\"a\",\"law_name\":\"L\",\"article\":\"A\",\"text\":\"x\"}\n\n{not json\n";
        let err = Corpus::new().parse_jsonl(text, "f").unwrap_err();
        assert!(matches!(err, CorpusError::Json { line: 3, .. }), "{err}");
    }

    #[test]
    fn empty_statute_text_rejected() {
        let text = "{\"id\":\"a\",\"law_name\":\"L\",\"article\":\"A\",\"text\":\"  \"}\n";
        assert!(Corpus::new().parse_jsonl(text, "f").is_err());
    }

    #[test]
    fn dangling_precedent_citation_rejected() {
        let mut corpus = Corpus::new();
        corpus.parse_jsonl(THREE_STATUTES, "s").unwrap();
        corpus
            .parse_jsonl(
                r#"{"id":"p1","title":"t","fact_summary":"f","holding":"h","cited_statutes":["rtsl-99"]}"#,
                "p",
            )
            .unwrap();
        assert_eq!(corpus.precedent_count(), 1);
        assert!(corpus.check_references().is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let kb = KnowledgeBase::builtin();
        let mut again = Corpus::new();
        again.parse_jsonl(&kb.corpus.to_jsonl(), "rt").unwrap();
        assert_eq!(again, kb.corpus);
    }

    #[test]
    fn bundle_round_trip() {
        let kb = KnowledgeBase::builtin();
        let back = KnowledgeBase::from_bundle_json(&kb.to_bundle_json()).unwrap();
        assert_eq!(back, kb);
    }

    #[test]
    fn builtin_taxonomy_shape() {
        let kb = KnowledgeBase::builtin();
        assert_eq!(kb.modes.modes().len(), 6);
        for mode in ModeId::ALL {
            let b = kb.modes.binding(mode);
            assert!((1..=2).contains(&b.core.len()));
            assert!(b.core.iter().all(|c| b.full.contains(c)));
        }
    }
}
