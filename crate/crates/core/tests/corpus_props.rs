use dashjudge_core::corpus::{parse_case_dataset, Corpus, KnowledgeBase, ModeStatuteMap};
use dashjudge_core::retrieval::{build_index, corpus_docs, Bm25Params, InvertedIndex};
use proptest::prelude::*;

const STATUTES: &str = include_str!("../assets/statutes.jsonl");
const PRECEDENTS: &str = include_str!("../assets/precedents.jsonl");
const MODE_MAP: &str = include_str!("../assets/mode_map.json");

fn lines() -> Vec<String> {
    STATUTES.lines().chain(PRECEDENTS.lines()).map(String::from).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loading_is_order_insensitive(shuffled in Just(lines()).prop_shuffle()) {
        let mut a = Corpus::new();
        a.parse_jsonl(&lines().join("\n"), "ordered").unwrap();
        let mut b = Corpus::new();
        b.parse_jsonl(&shuffled.join("\n"), "shuffled").unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.to_jsonl(), b.to_jsonl());
        let params = Bm25Params::default();
        let ia = build_index(&corpus_docs(&a), &params).unwrap();
        let ib = build_index(&corpus_docs(&b), &params).unwrap();
        prop_assert_eq!(ia.to_json(), ib.to_json());
    }
}

#[test]
fn corpus_round_trips_through_jsonl() {
    let mut a = Corpus::new();
    a.parse_jsonl(&lines().join("\n"), "assets").unwrap();
    let mut b = Corpus::new();
    b.parse_jsonl(&a.to_jsonl(), "round-trip").unwrap();
    assert_eq!(a, b);
    assert_eq!(a.statute_count(), 14);
    assert_eq!(a.precedent_count(), 8);
}

#[test]
fn bundle_round_trip() {
    let kb = KnowledgeBase::builtin();
    let back = KnowledgeBase::from_bundle_json(&kb.to_bundle_json()).unwrap();
    assert_eq!(kb, back);
    assert_eq!(kb.modes, ModeStatuteMap::from_json(MODE_MAP).unwrap());
}

#[test]
fn index_artifact_is_reproducible() {
    let kb = KnowledgeBase::builtin();
    let params = Bm25Params::default();
    let a = build_index(&corpus_docs(&kb.corpus), &params).unwrap().to_json();
    let b = build_index(&corpus_docs(&kb.corpus), &params).unwrap().to_json();
    assert_eq!(a, b);
    let back = InvertedIndex::from_json(&a).unwrap();
    assert_eq!(back.to_json(), a);
}

#[test]
fn duplicate_ids_reported_with_line() {
    let mut c = Corpus::new();
    let first = STATUTES.lines().next().unwrap();
    let err = c.parse_jsonl(&format!("{first}\n{first}"), "dup.jsonl").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("dup.jsonl") && msg.contains('2'), "{msg}");
    assert!(err.is_validation());
}

#[test]
fn five_mode_map_rejected() {
    let mut raw: serde_json::Value = serde_json::from_str(MODE_MAP).unwrap();
    raw["modes"].as_array_mut().unwrap().pop();
    let err = ModeStatuteMap::from_json(&raw.to_string()).unwrap_err();
    assert!(err.to_string().contains("expected 6 modes, found 5"), "{err}");
}

#[test]
fn fixture_cases_parse() {
    let text = include_str!("../../../fixtures/golden_cases.jsonl");
    let cases = parse_case_dataset(text, "golden_cases.jsonl").unwrap();
    assert_eq!(cases.len(), 6);
    assert!(cases.iter().all(|c| c.gold_mode.is_some()));
}
