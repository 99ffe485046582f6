//! Porter stemmer against the published reference vocabulary and its
//! expected output (23,531 words).

use topicbench::corpus::stem;

const VOCABULARY: &str = include_str!("fixtures/porter_voc.txt");
const EXPECTED: &str = include_str!("fixtures/porter_output.txt");

#[test]
fn reference_vocabulary_matches() {
    let words: Vec<&str> = VOCABULARY.lines().filter(|l| !l.is_empty()).collect();
    let expected: Vec<&str> = EXPECTED.lines().filter(|l| !l.is_empty()).collect();
    assert_eq!(words.len(), expected.len());
    assert_eq!(words.len(), 23_531);
    let mismatches: Vec<_> = words
        .iter()
        .zip(&expected)
        .filter(|(w, e)| stem(w) != **e)
        .map(|(w, e)| format!("{w}: got {} want {e}", stem(w)))
        .collect();
    assert!(
        mismatches.is_empty(),
        "{} mismatches, first: {:?}",
        mismatches.len(),
        &mismatches[..mismatches.len().min(20)]
    );
}

#[test]
fn stemming_is_pure() {
    for w in VOCABULARY.lines().step_by(97) {
        assert_eq!(stem(w), stem(w));
    }
}
