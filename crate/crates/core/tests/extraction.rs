use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use svolab::conllu::{Split, Treebank};
use svolab::triads::{extract_triads, extract_triads_excluding, read_triads, ExclusionList, ExtractionOptions, Surface, Triad};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn mini() -> Treebank {
    Treebank::load("en", "mini", &fixture("mini-ud-test.conllu")).unwrap()
}

fn golden() -> Vec<Triad> {
    read_triads(BufReader::new(File::open(fixture("mini-golden.jsonl")).unwrap())).unwrap()
}

fn pron_keys() -> Vec<String> {
    std::fs::read_to_string(fixture("mini-pron-keys.txt"))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

const KEEP_ALL: ExtractionOptions = ExtractionOptions {
    exclude_pronouns: false,
    surface: Surface::Lemma,
};

#[test]
fn mini_treebank_loads_with_rejects() {
    let tb = mini();
    assert_eq!(tb.split, Split::Test);
    assert_eq!(tb.sentences.len(), 18);
    let rejected: Vec<&str> = tb.rejected.iter().map(|r| r.sent_id.as_str()).collect();
    assert_eq!(rejected, ["m12", "m13", "m20"]);
}

#[test]
fn extraction_matches_golden() {
    let (triads, stats) = extract_triads(&mini(), &KEEP_ALL);
    assert_eq!(triads, golden());
    assert_eq!(stats.candidates, 14);
    assert_eq!(stats.retained, 14);
    assert_eq!(stats.same_arguments, 1);
}

#[test]
fn pronoun_exclusion_removes_exactly_the_planted_triads() {
    let (kept, stats) = extract_triads(&mini(), &ExtractionOptions::default());
    let pron = pron_keys();
    let expected: Vec<Triad> = golden().into_iter().filter(|t| !pron.contains(&t.key())).collect();
    assert_eq!(kept, expected);
    assert_eq!(stats.pronoun_dropped, pron.len());
    assert_eq!(stats.retained, 10);
    assert!((stats.retention - 10.0 / 14.0).abs() < 1e-12);
}

#[test]
fn exclusion_list_is_applied_after_pronouns() {
    let list = ExclusionList::parse("# reviewed\nmini/m16/3\nmini/m03/2\n");
    let (kept, stats) = extract_triads_excluding(&mini(), &ExtractionOptions::default(), &list);
    assert_eq!(stats.excluded_by_list, 1);
    assert_eq!(kept.len(), 9);
    assert!(kept.iter().all(|t| t.key() != "mini/m16/3"));
}

#[test]
fn form_surface_changes_only_same_argument_flags() {
    let opts = ExtractionOptions {
        exclude_pronouns: false,
        surface: Surface::Form,
    };
    let (triads, _) = extract_triads(&mini(), &opts);
    let flagged: Vec<String> = triads.iter().filter(|t| t.same_arguments).map(Triad::key).collect();
    assert_eq!(flagged, ["mini/m16/3"]);
}
