//! The legal information summary compiled from re-ranked hits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::index::{build_index, Bm25Params, DocKind, IndexDoc};
use super::{RankedDoc, RetrievalError};
use crate::agents::FactStatement;
use crate::corpus::{KnowledgeBase, ModeId, ModeStatuteMap};

pub const NO_PROVISIONS_MARKER: &str = "NO RELEVANT PROVISIONS RETRIEVED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatuteHit {
    pub rank: RankedDoc,
    pub citation: String,
    pub excerpt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecedentHit {
    pub rank: RankedDoc,
    pub title: String,
    pub digest: String,
    pub cited_statutes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegalSummary {
    pub query_fact_ref: String,
    pub inferred_category: String,
    pub inferred_mode: Option<ModeId>,
    pub statutes: Vec<StatuteHit>,
    pub precedents: Vec<PrecedentHit>,
    pub compiled_text: String,
}

impl LegalSummary {
    /// Summary used when retrieval is disabled or found nothing.
    pub fn empty(case_id: &str) -> Self {
        let mut summary = Self {
            query_fact_ref: case_id.to_string(),
            inferred_category: "unclassified".into(),
            inferred_mode: None,
            statutes: Vec::new(),
            precedents: Vec::new(),
            compiled_text: String::new(),
        };
        summary.compiled_text = summary.compile();
        summary
    }

    pub fn is_empty(&self) -> bool {
        self.statutes.is_empty() && self.precedents.is_empty()
    }

    pub fn statute_ids(&self) -> Vec<String> {
        self.statutes.iter().map(|h| h.rank.doc_id.clone()).collect()
    }

    pub fn precedent_ids(&self) -> Vec<String> {
        self.precedents.iter().map(|h| h.rank.doc_id.clone()).collect()
    }

    fn compile(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "LEGAL INFORMATION SUMMARY");
        let _ = writeln!(out, "case: {}", self.query_fact_ref);
        let _ = writeln!(out, "inferred category: {}", self.inferred_category);
        out.push('\n');
        if self.is_empty() {
            let _ = writeln!(out, "{NO_PROVISIONS_MARKER}");
            return out;
        }
        let _ = writeln!(out, "STATUTES");
        if self.statutes.is_empty() {
            let _ = writeln!(out, "(none)");
        }
        for (i, hit) in self.statutes.iter().enumerate() {
            let _ = writeln!(
                out,
                "{}. [{}] {} (score {:.4}): {}",
                i + 1,
                hit.rank.doc_id,
                hit.citation,
                hit.rank.score,
                hit.excerpt
            );
        }
        out.push('\n');
        let _ = writeln!(out, "PRECEDENTS");
        if self.precedents.is_empty() {
            let _ = writeln!(out, "(none)");
        }
        for (i, hit) in self.precedents.iter().enumerate() {
            let _ = writeln!(
                out,
                "{}. [{}] {} (score {:.4}): {} | cites: {}",
                i + 1,
                hit.rank.doc_id,
                hit.title,
                hit.rank.score,
                hit.digest,
                hit.cited_statutes.join(", ")
            );
        }
        out
    }
}

fn excerpt(text: &str, max_chars: usize) -> String {
    let mut chars = text.chars();
    let head: String = chars.by_ref().take(max_chars).collect();
    if chars.next().is_some() {
        format!("{head}...")
    } else {
        head
    }
}

/// Guesses the accident category by scoring the fact text against each
/// mode's name and definition with BM25. `None` when nothing matches.
pub fn infer_category(fact_text: &str, modes: &ModeStatuteMap) -> Option<ModeId> {
    let docs: Vec<IndexDoc> = modes
        .modes()
        .iter()
        .map(|m| IndexDoc::new(m.mode_id.as_str(), DocKind::Statute, format!("{}\n{}", m.name, m.definition)))
        .collect();
    let index = build_index(&docs, &Bm25Params::default()).expect("mode ids are unique");
    index
        .coarse_retrieve(fact_text, &Bm25Params::default())
        .first()
        .map(|top| top.doc_id.parse().expect("indexed mode ids parse"))
}

/// Resolves re-ranked hits against the corpus and compiles the digest text.
/// Hits keep their rank order.
pub fn assemble_legal_summary(
    fact: &FactStatement,
    inferred_mode: Option<ModeId>,
    statute_hits: &[RankedDoc],
    precedent_hits: &[RankedDoc],
    kb: &KnowledgeBase,
    excerpt_chars: usize,
) -> Result<LegalSummary, RetrievalError> {
    let statutes = statute_hits
        .iter()
        .map(|hit| {
            let s = kb
                .corpus
                .statute(&hit.doc_id)
                .ok_or_else(|| RetrievalError::UnresolvedDoc(hit.doc_id.clone()))?;
            Ok(StatuteHit {
                rank: hit.clone(),
                citation: s.citation(),
                excerpt: excerpt(&s.text, excerpt_chars),
            })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    let precedents = precedent_hits
        .iter()
        .map(|hit| {
            let p = kb
                .corpus
                .precedent(&hit.doc_id)
                .ok_or_else(|| RetrievalError::UnresolvedDoc(hit.doc_id.clone()))?;
            Ok(PrecedentHit {
                rank: hit.clone(),
                title: p.title.clone(),
                digest: format!("{} Holding: {}", excerpt(&p.fact_summary, excerpt_chars), p.holding),
                cited_statutes: p.cited_statutes.clone(),
            })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    let inferred_category = match inferred_mode {
        Some(mode) => format!("{} ({mode})", kb.modes.mode(mode).name),
        None => "unclassified".to_string(),
    };
    let mut summary = LegalSummary {
        query_fact_ref: fact.case_id.clone(),
        inferred_category,
        inferred_mode,
        statutes,
        precedents,
        compiled_text: String::new(),
    };
    summary.compiled_text = summary.compile();
    Ok(summary)
}
