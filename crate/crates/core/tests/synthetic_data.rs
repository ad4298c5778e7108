use picpriv::corpus::load_corpus;
use picpriv::synth::{generate, planted_label, SynthConfig, FEATURE_BLOCK, MARKER_TAG};

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/synthetic_4000.jsonl");

#[test]
fn checked_in_corpus_matches_the_generator() {
    let on_disk = load_corpus(DATA).unwrap();
    assert_eq!(on_disk, generate(&SynthConfig::default()).unwrap());
}

#[test]
fn checked_in_corpus_has_the_planted_structure() {
    let recs = load_corpus(DATA).unwrap();
    let private = recs.iter().filter(|r| r.label.is_private()).count();
    assert_eq!((private, recs.len() - private), (1000, 3000));
    for r in &recs {
        assert_eq!(planted_label(r.block(FEATURE_BLOCK).unwrap()), r.label);
    }
    let marked = recs
        .iter()
        .filter(|r| r.user_tags.iter().any(|t| t == MARKER_TAG) == r.label.is_private())
        .count();
    assert!(marked as f64 / recs.len() as f64 > 0.95);
}
