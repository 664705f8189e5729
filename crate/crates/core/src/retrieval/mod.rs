//! Two-stage legal retrieval: BM25 coarse retrieval, embedding re-ranking,
//! and the legal information summary handed to the judges.

mod embed;
mod index;
mod summary;
mod tokenize;

pub use embed::{cosine, EmbeddingBackend, HttpEmbedder};
pub use index::{
    build_index, corpus_docs, query_terms, sort_ranked, Bm25Params, DocKind, IndexDoc, InvertedIndex, Posting,
    RankedDoc, Stage, StoredDoc, INDEX_FORMAT_VERSION,
};
pub use summary::{
    assemble_legal_summary, infer_category, LegalSummary, PrecedentHit, StatuteHit, NO_PROVISIONS_MARKER,
};
pub use tokenize::{is_cjk, tokenize};

use thiserror::Error;

use crate::agents::FactStatement;
use crate::backend::BackendError;
use crate::corpus::KnowledgeBase;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("invalid retrieval parameters: {0}")]
    InvalidParams(String),
    #[error("duplicate document id {0:?}")]
    DuplicateDoc(String),
    #[error("document {0:?} is not in the index")]
    UnknownDoc(String),
    #[error("document {0:?} is in the index but not in the corpus")]
    UnresolvedDoc(String),
    #[error("embedding backend failed: {0}")]
    Backend(#[from] BackendError),
    #[error("embedding backend returned {got} vectors of dimension {dim:?}, expected {expected} of dimension {want}")]
    Embedding {
        got: usize,
        expected: usize,
        dim: Option<usize>,
        want: usize,
    },
    #[error("index artifact: {0}")]
    Artifact(String),
}

/// Re-scores coarse candidates by cosine similarity between the query
/// embedding and each candidate's embedding, keeping the top
/// `top_k_rerank`.
pub fn rerank(
    index: &InvertedIndex,
    candidates: &[RankedDoc],
    query: &str,
    backend: &dyn EmbeddingBackend,
    params: &Bm25Params,
) -> Result<Vec<RankedDoc>, RetrievalError> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let mut texts = Vec::with_capacity(candidates.len() + 1);
    texts.push(query.to_string());
    for c in candidates {
        let doc = index
            .doc(&c.doc_id)
            .ok_or_else(|| RetrievalError::UnknownDoc(c.doc_id.clone()))?;
        texts.push(doc.text.clone());
    }
    let vectors = backend.embed(&texts)?;
    let want = backend.dimension();
    if vectors.len() != texts.len() || vectors.iter().any(|v| v.len() != want) {
        return Err(RetrievalError::Embedding {
            got: vectors.len(),
            expected: texts.len(),
            dim: vectors.iter().map(Vec::len).find(|&d| d != want),
            want,
        });
    }
    let (query_vec, doc_vecs) = vectors.split_first().expect("query vector present");
    let mut ranked: Vec<RankedDoc> = candidates
        .iter()
        .zip(doc_vecs)
        .map(|(c, v)| RankedDoc {
            doc_id: c.doc_id.clone(),
            score: cosine(query_vec, v),
            stage: Stage::Reranked,
        })
        .collect();
    sort_ranked(&mut ranked);
    ranked.truncate(params.top_k_rerank);
    Ok(ranked)
}

/// The judge assistant's retrieval pass for one fact statement.
///
/// The accident category is inferred first and appended to the query.
/// Statutes and precedents are retrieved as separate pools of equal depth.
pub fn retrieve_for_fact(
    kb: &KnowledgeBase,
    index: &InvertedIndex,
    fact: &FactStatement,
    embedder: &dyn EmbeddingBackend,
    params: &Bm25Params,
    excerpt_chars: usize,
) -> Result<LegalSummary, RetrievalError> {
    let category = infer_category(&fact.retrieval_text(), &kb.modes);
    let mut query = fact.retrieval_text();
    if let Some(mode) = category {
        query.push('\n');
        query.push_str(&kb.modes.mode(mode).name);
    }
    let mut pools = Vec::with_capacity(2);
    for kind in [DocKind::Statute, DocKind::Precedent] {
        let coarse = index.coarse_retrieve_kind(&query, params, kind);
        pools.push(rerank(index, &coarse, &query, embedder, params)?);
    }
    let precedents = pools.pop().expect("two pools");
    let statutes = pools.pop().expect("two pools");
    assemble_legal_summary(fact, category, &statutes, &precedents, kb, excerpt_chars)
}
