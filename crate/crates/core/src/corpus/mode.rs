//! Responsibility-mode taxonomy and its statute bindings.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError};

/// One of the six closed-set responsibility modes.
///
/// Parsing rejects anything outside `RM1..=RM6`, so a `ModeId` that exists
/// is always inside the taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModeId(u8);

impl ModeId {
    pub const COUNT: usize = 6;

    pub const ALL: [ModeId; Self::COUNT] = [
        ModeId(1),
        ModeId(2),
        ModeId(3),
        ModeId(4),
        ModeId(5),
        ModeId(6),
    ];

    /// Zero-based position, usable as a confusion-matrix index.
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn from_index(index: usize) -> Option<ModeId> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        ["RM1", "RM2", "RM3", "RM4", "RM5", "RM6"][self.index()]
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModeId {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        let digits = trimmed
            .strip_prefix("RM")
            .or_else(|| trimmed.strip_prefix("rm"))
            .ok_or_else(|| CorpusError::UnknownMode(s.to_string()))?;
        match digits.parse::<u8>() {
            Ok(n @ 1..=6) if digits.len() == 1 => Ok(ModeId(n)),
            _ => Err(CorpusError::UnknownMode(s.to_string())),
        }
    }
}

impl TryFrom<String> for ModeId {
    type Error = CorpusError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<ModeId> for String {
    fn from(value: ModeId) -> Self {
        value.as_str().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponsibilityMode {
    pub mode_id: ModeId,
    pub name: String,
    pub definition: String,
    pub statute_ids: Vec<String>,
    pub core_statute_ids: Vec<String>,
}

/// Full and core statute sets bound to one mode, in configured order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatuteBinding<'a> {
    pub full: &'a [String],
    pub core: &'a [String],
}

/// The validated RM1..RM6 taxonomy. Modes are stored in `RM1..RM6` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModeStatuteMap {
    modes: Vec<ResponsibilityMode>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeMapDocument {
    modes: Vec<ResponsibilityMode>,
}

impl<'de> Deserialize<'de> for ModeStatuteMap {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = ModeMapDocument::deserialize(deserializer)?;
        ModeStatuteMap::new(doc.modes).map_err(serde::de::Error::custom)
    }
}

impl ModeStatuteMap {
    /// Checks the structural invariants: exactly six distinct modes and a
    /// core set of one or two statutes drawn from each mode's full set.
    pub fn new(mut modes: Vec<ResponsibilityMode>) -> Result<Self, CorpusError> {
        if modes.len() != ModeId::COUNT {
            return Err(CorpusError::Validation(format!(
                "expected 6 modes, found {}",
                modes.len()
            )));
        }
        modes.sort_by_key(|m| m.mode_id);
        for pair in modes.windows(2) {
            if pair[0].mode_id == pair[1].mode_id {
                return Err(CorpusError::Validation(format!(
                    "mode {} defined more than once",
                    pair[0].mode_id
                )));
            }
        }
        for mode in &modes {
            let id = mode.mode_id;
            if mode.core_statute_ids.is_empty() {
                return Err(CorpusError::Validation(format!("{id}: empty core statute set")));
            }
            if mode.core_statute_ids.len() > 2 {
                return Err(CorpusError::Validation(format!(
                    "{id}: core statute set has {} entries, at most 2 allowed",
                    mode.core_statute_ids.len()
                )));
            }
            let full: BTreeSet<&str> = mode.statute_ids.iter().map(String::as_str).collect();
            if full.len() != mode.statute_ids.len() {
                return Err(CorpusError::Validation(format!("{id}: duplicate statute id")));
            }
            if let Some(stray) = mode.core_statute_ids.iter().find(|c| !full.contains(c.as_str())) {
                return Err(CorpusError::Validation(format!(
                    "{id}: core statute {stray} is not in the mode's statute set"
                )));
            }
            let core: BTreeSet<&str> = mode.core_statute_ids.iter().map(String::as_str).collect();
            if core.len() != mode.core_statute_ids.len() {
                return Err(CorpusError::Validation(format!("{id}: duplicate core statute id")));
            }
        }
        Ok(Self { modes })
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        serde_json::from_str(text).map_err(|e| match e.classify() {
            serde_json::error::Category::Data => CorpusError::Validation(e.to_string()),
            _ => CorpusError::Json {
                origin: "mode map".into(),
                line: e.line(),
                source: e,
            },
        })
    }

    /// Every statute id referenced by the taxonomy must exist in `corpus`.
    pub fn check_against(&self, corpus: &Corpus) -> Result<(), CorpusError> {
        for mode in &self.modes {
            if let Some(missing) = mode.statute_ids.iter().find(|id| corpus.statute(id).is_none()) {
                return Err(CorpusError::Validation(format!(
                    "{}: statute id {missing} does not resolve against the corpus",
                    mode.mode_id
                )));
            }
        }
        Ok(())
    }

    pub fn modes(&self) -> &[ResponsibilityMode] {
        &self.modes
    }

    pub fn mode(&self, id: ModeId) -> &ResponsibilityMode {
        &self.modes[id.index()]
    }

    pub fn binding(&self, id: ModeId) -> StatuteBinding<'_> {
        let mode = self.mode(id);
        StatuteBinding {
            full: &mode.statute_ids,
            core: &mode.core_statute_ids,
        }
    }

    /// Looks up a mode by its textual id (`"RM1"`..`"RM6"`).
    pub fn statutes_for_mode(&self, mode_id: &str) -> Result<StatuteBinding<'_>, CorpusError> {
        Ok(self.binding(mode_id.parse()?))
    }
}

/// Reads and validates a mode map, resolving its statute ids against `corpus`.
pub fn load_mode_map(path: &Path, corpus: &Corpus) -> Result<ModeStatuteMap, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let map = ModeStatuteMap::from_json(&text)?;
    map.check_against(corpus)?;
    Ok(map)
}
