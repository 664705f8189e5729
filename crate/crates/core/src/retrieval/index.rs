//! Inverted index and Okapi BM25 coarse retrieval.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::RetrievalError;
use crate::corpus::{Corpus, Precedent, Statute};

pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub top_k_coarse: usize,
    pub top_k_rerank: usize,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: 1.2,
            b: 0.75,
            top_k_coarse: 100,
            top_k_rerank: 10,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if !(self.k1.is_finite() && self.k1 >= 0.0) {
            return Err(RetrievalError::InvalidParams(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(RetrievalError::InvalidParams(format!("b must be in [0, 1], got {}", self.b)));
        }
        if self.top_k_coarse == 0 || self.top_k_rerank == 0 {
            return Err(RetrievalError::InvalidParams("top-k values must be positive".into()));
        }
        if self.top_k_rerank > self.top_k_coarse {
            return Err(RetrievalError::InvalidParams(format!(
                "top_k_rerank ({}) exceeds top_k_coarse ({})",
                self.top_k_rerank, self.top_k_coarse
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    Statute,
    Precedent,
}

/// A document as seen by the index: an id, its kind, and the text to index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexDoc {
    pub id: String,
    pub kind: DocKind,
    pub text: String,
}

impl IndexDoc {
    pub fn new(id: impl Into<String>, kind: DocKind, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind,
            text: text.into(),
        }
    }

    pub fn from_statute(s: &Statute) -> Self {
        let text = format!("{} {}\n{}\n{}", s.law_name, s.article, s.text, s.tags.join(" "));
        Self::new(s.id.clone(), DocKind::Statute, text)
    }

    pub fn from_precedent(p: &Precedent) -> Self {
        let text = format!(
            "{}\n{}\n{}\n{}",
            p.title,
            p.fact_summary,
            p.holding,
            p.tags.join(" ")
        );
        Self::new(p.id.clone(), DocKind::Precedent, text)
    }
}

/// Index documents for every statute and precedent, in id order.
pub fn corpus_docs(corpus: &Corpus) -> Vec<IndexDoc> {
    corpus
        .statutes()
        .map(IndexDoc::from_statute)
        .chain(corpus.precedents().map(IndexDoc::from_precedent))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredDoc {
    pub id: String,
    pub kind: DocKind,
    pub text: String,
    pub length: usize,
}

/// BM25 inverted index.
///
/// Documents are numbered by ascending id, so postings sorted by document
/// number are also sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertedIndex {
    format_version: u32,
    params: Bm25Params,
    docs: Vec<StoredDoc>,
    postings: BTreeMap<String, Vec<Posting>>,
    avg_doc_length: f64,
}

/// Builds an index over `docs`. Document ids must be unique.
pub fn build_index(docs: &[IndexDoc], params: &Bm25Params) -> Result<InvertedIndex, RetrievalError> {
    params.validate()?;
    let mut sorted: Vec<&IndexDoc> = docs.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(pair) = sorted.windows(2).find(|p| p[0].id == p[1].id) {
        return Err(RetrievalError::DuplicateDoc(pair[0].id.clone()));
    }

    let mut stored = Vec::with_capacity(sorted.len());
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    let mut total_len = 0usize;
    for (num, doc) in sorted.iter().enumerate() {
        let terms = tokenize(&doc.text);
        total_len += terms.len();
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for term in &terms {
            *counts.entry(term.clone()).or_default() += 1;
        }
        for (term, tf) in counts {
            postings.entry(term).or_default().push(Posting { doc: num as u32, tf });
        }
        stored.push(StoredDoc {
            id: doc.id.clone(),
            kind: doc.kind,
            text: doc.text.clone(),
            length: terms.len(),
        });
    }
    let avg_doc_length = if stored.is_empty() {
        0.0
    } else {
        total_len as f64 / stored.len() as f64
    };
    Ok(InvertedIndex {
        format_version: INDEX_FORMAT_VERSION,
        params: *params,
        docs: stored,
        postings,
        avg_doc_length,
    })
}

/// `ln((N - df + 0.5) / (df + 0.5) + 1)`; never negative.
pub(crate) fn idf(doc_count: usize, df: usize) -> f64 {
    let n = doc_count as f64;
    let df = df as f64;
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

fn term_weight(idf: f64, tf: u32, doc_len: usize, avg_len: f64, params: &Bm25Params) -> f64 {
    let tf = f64::from(tf);
    let norm = 1.0 - params.b + params.b * doc_len as f64 / avg_len;
    idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
}

/// Distinct query terms in lexicographic order; scoring sums over these.
pub fn query_terms(query: &str) -> Vec<String> {
    tokenize(query).into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Coarse,
    Reranked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDoc {
    pub doc_id: String,
    pub score: f64,
    pub stage: Stage,
}

/// Score descending, then doc id ascending.
pub fn sort_ranked(docs: &mut [RankedDoc]) {
    docs.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
}

impl InvertedIndex {
    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    /// Parameters the index was built with.
    pub fn params(&self) -> &Bm25Params {
        &self.params
    }

    pub fn doc(&self, id: &str) -> Option<&StoredDoc> {
        self.position(id).map(|i| &self.docs[i])
    }

    pub fn docs(&self) -> &[StoredDoc] {
        &self.docs
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    fn position(&self, id: &str) -> Option<usize> {
        self.docs.binary_search_by(|d| d.id.as_str().cmp(id)).ok()
    }

    /// Okapi BM25 score of one document for a set of (distinct) query terms.
    pub fn bm25_score(
        &self,
        query_terms: &[String],
        doc_id: &str,
        params: &Bm25Params,
    ) -> Result<f64, RetrievalError> {
        let num = self
            .position(doc_id)
            .ok_or_else(|| RetrievalError::UnknownDoc(doc_id.to_string()))?;
        let len = self.docs[num].length;
        let mut score = 0.0;
        for term in query_terms {
            let postings = self.postings(term);
            if let Ok(at) = postings.binary_search_by_key(&(num as u32), |p| p.doc) {
                let idf = idf(self.docs.len(), postings.len());
                score += term_weight(idf, postings[at].tf, len, self.avg_doc_length, params);
            }
        }
        Ok(score)
    }

    /// BM25 top-k over all documents. Zero-score documents are excluded.
    pub fn coarse_retrieve(&self, query: &str, params: &Bm25Params) -> Vec<RankedDoc> {
        self.coarse_retrieve_filtered(query, params, None)
    }

    /// BM25 top-k restricted to one document kind.
    pub fn coarse_retrieve_kind(&self, query: &str, params: &Bm25Params, kind: DocKind) -> Vec<RankedDoc> {
        self.coarse_retrieve_filtered(query, params, Some(kind))
    }

    fn coarse_retrieve_filtered(
        &self,
        query: &str,
        params: &Bm25Params,
        kind: Option<DocKind>,
    ) -> Vec<RankedDoc> {
        let terms = query_terms(query);
        // Term-at-a-time accumulation in the same term order as bm25_score,
        // so both produce bit-identical sums.
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for term in &terms {
            let postings = self.postings(term);
            if postings.is_empty() {
                continue;
            }
            let idf = idf(self.docs.len(), postings.len());
            for p in postings {
                let doc = &self.docs[p.doc as usize];
                if kind.is_some_and(|k| k != doc.kind) {
                    continue;
                }
                *acc.entry(p.doc).or_insert(0.0) +=
                    term_weight(idf, p.tf, doc.length, self.avg_doc_length, params);
            }
        }
        let mut ranked: Vec<RankedDoc> = acc
            .into_iter()
            .filter(|(_, score)| *score > 0.0)
            .map(|(num, score)| RankedDoc {
                doc_id: self.docs[num as usize].id.clone(),
                score,
                stage: Stage::Coarse,
            })
            .collect();
        sort_ranked(&mut ranked);
        ranked.truncate(params.top_k_coarse);
        ranked
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("index serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RetrievalError> {
        let index: InvertedIndex =
            serde_json::from_str(text).map_err(|e| RetrievalError::Artifact(e.to_string()))?;
        if index.format_version != INDEX_FORMAT_VERSION {
            return Err(RetrievalError::Artifact(format!(
                "unsupported index format version {}",
                index.format_version
            )));
        }
        Ok(index)
    }
}
