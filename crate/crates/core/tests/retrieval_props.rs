use std::collections::{BTreeMap, BTreeSet};

use dashjudge_core::mock::HashEmbedder;
use dashjudge_core::retrieval::{
    build_index, cosine, rerank, tokenize, Bm25Params, DocKind, EmbeddingBackend, IndexDoc, RankedDoc,
};
use proptest::prelude::*;

const VOCAB: &[&str] = &[
    "red", "light", "lane", "change", "crash", "car", "truck", "signal", "yield", "crosswalk", "pedestrian",
    "brake", "junction", "turn", "left", "speed", "闯红灯", "追尾",
];

/// Textbook Okapi BM25, computed straight from token lists.
fn oracle_scores(docs: &[(String, String)], query: &str, k1: f64, b: f64) -> Vec<(String, f64)> {
    let tokenized: Vec<(String, Vec<String>)> = docs.iter().map(|(id, t)| (id.clone(), tokenize(t))).collect();
    let n = tokenized.len() as f64;
    let avg = tokenized.iter().map(|(_, t)| t.len()).sum::<usize>() as f64 / n;
    let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
    let mut out = Vec::new();
    for (id, toks) in &tokenized {
        let mut score = 0.0;
        for term in &terms {
            let tf = toks.iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = tokenized.iter().filter(|(_, t)| t.contains(term)).count() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            let len = toks.len() as f64;
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg));
        }
        if score > 0.0 {
            out.push((id.clone(), score));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

fn docs_from(texts: &[String]) -> Vec<(String, String)> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| (format!("d{i:02}"), t.clone()))
        .collect()
}

fn index_docs(docs: &[(String, String)]) -> Vec<IndexDoc> {
    docs.iter()
        .map(|(id, t)| IndexDoc::new(id.clone(), DocKind::Statute, t.clone()))
        .collect()
}

fn text_strategy(max_words: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(VOCAB), 1..=max_words).prop_map(|w| w.join(" "))
}

#[test]
fn pinned_toy_scores() {
    // Worked by hand: N = 3, every document has 3 tokens so the length
    // norm is 1 and each matched term contributes its IDF.
    // red: df 2, ln(1 + 1.5/2.5) = ln 1.6; light: df 1, ln(1 + 2.5/1.5) = ln(8/3).
    let docs = docs_from(&["red light run".into(), "lane change crash".into(), "red car parked".into()]);
    let index = build_index(&index_docs(&docs), &Bm25Params::default()).unwrap();
    let hits = index.coarse_retrieve("red light", &Bm25Params::default());
    assert_eq!(hits.len(), 2);
    assert_eq!(hits[0].doc_id, "d00");
    assert!((hits[0].score - 1.4508328822574619).abs() < 1e-9);
    assert!((hits[0].score - (1.6f64.ln() + (8.0f64 / 3.0).ln())).abs() < 1e-12);
    assert_eq!(hits[1].doc_id, "d02");
    assert!((hits[1].score - 0.47000362924573563).abs() < 1e-9);
}

#[test]
fn oracle_values_match_zero_for_absent_terms() {
    let docs = docs_from(&["red light".into(), "lane change".into()]);
    assert!(oracle_scores(&docs, "truck", 1.2, 0.75).is_empty());
    let index = build_index(&index_docs(&docs), &Bm25Params::default()).unwrap();
    assert!(index.coarse_retrieve("truck", &Bm25Params::default()).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn coarse_retrieval_equals_oracle(
        texts in prop::collection::vec(text_strategy(12), 1..=20),
        query in text_strategy(5),
        k1 in 0.0f64..3.0,
        b in 0.0f64..=1.0,
    ) {
        let docs = docs_from(&texts);
        let params = Bm25Params { k1, b, top_k_coarse: 100, top_k_rerank: 10 };
        let index = build_index(&index_docs(&docs), &params).unwrap();
        let got = index.coarse_retrieve(&query, &params);
        let want = oracle_scores(&docs, &query, k1, b);
        prop_assert_eq!(got.len(), want.len());
        for (g, (id, score)) in got.iter().zip(&want) {
            prop_assert_eq!(&g.doc_id, id);
            prop_assert!((g.score - score).abs() <= 1e-9, "{} vs {}", g.score, score);
        }
    }

    #[test]
    fn padding_a_document_lowers_its_score(
        base in text_strategy(6),
        others in prop::collection::vec(text_strategy(6), 1..5),
        b in 0.05f64..=1.0,
    ) {
        // Doubling a document's length with tokens absent from the query
        // can only lower its score when b > 0.
        let query = base.split(' ').next().unwrap().to_string();
        let pad = vec!["zzpad"; base.split(' ').count()].join(" ");
        let params = Bm25Params { b, ..Bm25Params::default() };
        let mut texts = vec![base.clone()];
        texts.extend(others.clone());
        let plain = build_index(&index_docs(&docs_from(&texts)), &params).unwrap();
        texts[0] = format!("{base} {pad}");
        let padded = build_index(&index_docs(&docs_from(&texts)), &params).unwrap();
        let terms = vec![tokenize(&query).remove(0)];
        let before = plain.bm25_score(&terms, "d00", &params).unwrap();
        let after = padded.bm25_score(&terms, "d00", &params).unwrap();
        prop_assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn extra_occurrence_raises_score(text in text_strategy(8), k1 in 0.1f64..3.0) {
        let term = tokenize(&text).remove(0);
        let params = Bm25Params { k1, b: 0.0, ..Bm25Params::default() };
        let other = "zzother words".to_string();
        let once = build_index(&index_docs(&docs_from(&[text.clone(), other.clone()])), &params).unwrap();
        let twice =
            build_index(&index_docs(&docs_from(&[format!("{text} {term}"), other])), &params).unwrap();
        let terms = vec![term];
        prop_assert!(
            twice.bm25_score(&terms, "d00", &params).unwrap() > once.bm25_score(&terms, "d00", &params).unwrap()
        );
    }

    #[test]
    fn rarer_terms_weigh_more(texts in prop::collection::vec(text_strategy(8), 2..=20)) {
        let docs = docs_from(&texts);
        let index = build_index(&index_docs(&docs), &Bm25Params::default()).unwrap();
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for (_, t) in &docs {
            for tok in tokenize(t).into_iter().collect::<BTreeSet<_>>() {
                *df.entry(tok).or_default() += 1;
            }
        }
        for (term, &count) in &df {
            prop_assert_eq!(index.document_frequency(term), count);
        }
        // A term in a single document scores that document higher than a
        // term present in every document, at equal tf and length.
        let n = docs.len() as f64;
        let idf = |d: f64| ((n - d + 0.5) / (d + 0.5) + 1.0).ln();
        prop_assert!(idf(1.0) > idf(n));
        prop_assert!(idf(n) > 0.0);
    }

    #[test]
    fn rerank_is_subset_and_totally_ordered(
        texts in prop::collection::vec(text_strategy(10), 1..=20),
        query in text_strategy(4),
        top in 1usize..8,
    ) {
        let docs = docs_from(&texts);
        let params = Bm25Params { top_k_rerank: top, ..Bm25Params::default() };
        let index = build_index(&index_docs(&docs), &params).unwrap();
        let coarse = index.coarse_retrieve(&query, &params);
        let fine = rerank(&index, &coarse, &query, &HashEmbedder::default(), &params).unwrap();
        let coarse_ids: BTreeSet<&str> = coarse.iter().map(|d| d.doc_id.as_str()).collect();
        prop_assert!(fine.len() <= top.min(coarse.len()));
        prop_assert!(fine.iter().all(|d| coarse_ids.contains(d.doc_id.as_str())));
        for w in fine.windows(2) {
            let ordered = w[0].score > w[1].score || (w[0].score == w[1].score && w[0].doc_id < w[1].doc_id);
            prop_assert!(ordered);
        }
        for w in coarse.windows(2) {
            let ordered = w[0].score > w[1].score || (w[0].score == w[1].score && w[0].doc_id < w[1].doc_id);
            prop_assert!(ordered);
        }
    }

    #[test]
    fn rerank_equals_brute_force_cosine(
        texts in prop::collection::vec(text_strategy(6), 1..=20),
        query in text_strategy(4),
        top in 1usize..12,
    ) {
        let docs = docs_from(&texts);
        let params = Bm25Params { top_k_rerank: top, ..Bm25Params::default() };
        let index = build_index(&index_docs(&docs), &params).unwrap();
        let candidates: Vec<RankedDoc> = index.coarse_retrieve(&query, &params);
        let embedder = HashEmbedder::default();
        let got = rerank(&index, &candidates, &query, &embedder, &params).unwrap();

        let q = embedder.embed(std::slice::from_ref(&query)).unwrap().remove(0);
        let mut want: Vec<(String, f64)> = candidates
            .iter()
            .map(|c| {
                let text = docs.iter().find(|(id, _)| *id == c.doc_id).unwrap().1.clone();
                (c.doc_id.clone(), cosine(&q, &embedder.hash_embed(&text)))
            })
            .collect();
        want.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        want.truncate(top);
        let got_pairs: Vec<(String, f64)> = got.into_iter().map(|d| (d.doc_id, d.score)).collect();
        prop_assert_eq!(got_pairs, want);
    }
}
