//! Scoring extracted technology lists against a gold standard.
//!
//! Matching is set-based per paper after canonicalization: a term and its
//! abbreviation count as the same technology whenever either side of the
//! comparison uses the short form. Corpus-level precision, recall, and F1
//! are micro-averaged (counts pooled across papers, then one division).

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::postprocess::{normalize_term, short_form};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl EvalCounts {
    pub fn add(&mut self, other: &EvalCounts) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }
}

/// Harmonic mean of precision and recall. Unit-agnostic: feeding
/// percentages yields a percentage.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        return 0.0;
    }
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `None` when the denominator is zero (nothing predicted / no gold).
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub fn compute_metrics(counts: &EvalCounts) -> Metrics {
    let ratio = |num: usize, denom: usize| {
        if denom == 0 {
            None
        } else {
            Some(num as f64 / denom as f64)
        }
    };
    let precision = ratio(
        counts.true_positives,
        counts.true_positives + counts.false_positives,
    );
    let recall = ratio(
        counts.true_positives,
        counts.true_positives + counts.false_negatives,
    );
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) => Some(f1_score(p, r)),
        _ => None,
    };
    Metrics {
        precision,
        recall,
        f1,
    }
}

/// Map a term to its comparison form: normalized, then collapsed to its
/// short form when that short form occurs anywhere in `vocabulary`.
fn canonical(term: &str, vocabulary: &HashSet<String>) -> String {
    let normalized = normalize_term(term);
    match short_form(&normalized) {
        Some(short) if vocabulary.contains(&short) => short,
        _ => normalized,
    }
}

/// Count matches between one paper's predicted and gold term lists.
pub fn match_lists(predicted: &[String], gold: &[String]) -> EvalCounts {
    let mut vocabulary: HashSet<String> = HashSet::new();
    for term in predicted.iter().chain(gold) {
        let normalized = normalize_term(term);
        if let Some(short) = short_form(&normalized) {
            vocabulary.insert(short);
        }
        vocabulary.insert(normalized);
    }
    let predicted_set: HashSet<String> = predicted
        .iter()
        .map(|t| canonical(t, &vocabulary))
        .filter(|t| !t.is_empty())
        .collect();
    let gold_set: HashSet<String> = gold
        .iter()
        .map(|t| canonical(t, &vocabulary))
        .filter(|t| !t.is_empty())
        .collect();
    EvalCounts {
        true_positives: predicted_set.intersection(&gold_set).count(),
        false_positives: predicted_set.difference(&gold_set).count(),
        false_negatives: gold_set.difference(&predicted_set).count(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperEval {
    pub paper_id: String,
    pub counts: EvalCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEval {
    pub per_paper: Vec<PaperEval>,
    pub totals: EvalCounts,
    pub metrics: Metrics,
}

/// Score a whole corpus. Both sides must cover exactly the same paper ids.
pub fn evaluate_corpus(
    predicted: &[(String, Vec<String>)],
    gold: &[(String, Vec<String>)],
) -> Result<CorpusEval> {
    if predicted.is_empty() || gold.is_empty() {
        return Err(Error::Precondition(
            "evaluation needs at least one paper on each side".into(),
        ));
    }
    let predicted_map: BTreeMap<&str, &Vec<String>> =
        predicted.iter().map(|(id, t)| (id.as_str(), t)).collect();
    let gold_map: BTreeMap<&str, &Vec<String>> =
        gold.iter().map(|(id, t)| (id.as_str(), t)).collect();
    if predicted_map.len() != predicted.len() {
        return Err(Error::Pairing("duplicate paper id among predictions".into()));
    }
    if gold_map.len() != gold.len() {
        return Err(Error::Pairing("duplicate paper id in gold standard".into()));
    }
    for id in predicted_map.keys() {
        if !gold_map.contains_key(id) {
            return Err(Error::Pairing(format!("paper {id} has no gold entry")));
        }
    }
    for id in gold_map.keys() {
        if !predicted_map.contains_key(id) {
            return Err(Error::Pairing(format!("paper {id} has no prediction")));
        }
    }

    let mut totals = EvalCounts::default();
    let mut per_paper = Vec::new();
    for (id, pred_terms) in &predicted_map {
        let counts = match_lists(pred_terms, gold_map[id]);
        totals.add(&counts);
        per_paper.push(PaperEval {
            paper_id: (*id).to_owned(),
            counts,
        });
    }
    Ok(CorpusEval {
        per_paper,
        totals,
        metrics: compute_metrics(&totals),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| (*s).to_owned()).collect()
    }

    #[test]
    fn f1_is_the_harmonic_mean() {
        assert_eq!(f1_score(1.0, 1.0), 1.0);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
        assert!((f1_score(0.5, 1.0) - 2.0 / 3.0).abs() < 1e-12);
        // Percent inputs give percent outputs.
        assert!((f1_score(50.0, 100.0) - 200.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn zero_denominators_are_undefined_not_zero() {
        let m = compute_metrics(&EvalCounts {
            true_positives: 0,
            false_positives: 0,
            false_negatives: 3,
        });
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.f1, None);
    }

    #[test]
    fn exact_overlap_counts() {
        let counts = match_lists(&v(&["eeg", "vr", "matlab"]), &v(&["eeg", "unity"]));
        assert_eq!(
            counts,
            EvalCounts {
                true_positives: 1,
                false_positives: 2,
                false_negatives: 1
            }
        );
    }

    #[test]
    fn abbreviations_match_their_long_forms() {
        // Prediction uses the short form, gold embeds it.
        let counts = match_lists(&v(&["eeg"]), &v(&["electroencephalography (eeg)"]));
        assert_eq!(counts.true_positives, 1);
        assert_eq!(counts.false_positives, 0);
        assert_eq!(counts.false_negatives, 0);

        // Prediction spells it out, gold has the initials.
        let counts = match_lists(&v(&["brain computer interface"]), &v(&["bci"]));
        assert_eq!(counts.true_positives, 1);

        // Without the short form anywhere, long forms stand alone.
        let counts = match_lists(&v(&["brain computer interface"]), &v(&["interface"]));
        assert_eq!(counts.true_positives, 0);
    }

    #[test]
    fn matching_is_case_and_whitespace_insensitive() {
        let counts = match_lists(&v(&["Virtual  Reality"]), &v(&["virtual reality"]));
        assert_eq!(counts.true_positives, 1);
    }

    #[test]
    fn corpus_micro_average_pools_counts() {
        let predicted = vec![
            ("p1".to_owned(), v(&["eeg", "vr"])),
            ("p2".to_owned(), v(&["matlab"])),
        ];
        let gold = vec![
            ("p1".to_owned(), v(&["eeg"])),
            ("p2".to_owned(), v(&["matlab", "unity"])),
        ];
        let eval = evaluate_corpus(&predicted, &gold).unwrap();
        assert_eq!(eval.totals.true_positives, 2);
        assert_eq!(eval.totals.false_positives, 1);
        assert_eq!(eval.totals.false_negatives, 1);
        assert_eq!(eval.metrics.precision, Some(2.0 / 3.0));
        assert_eq!(eval.metrics.recall, Some(2.0 / 3.0));
        assert!((eval.metrics.f1.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(eval.per_paper.len(), 2);
    }

    #[test]
    fn mismatched_paper_sets_are_rejected() {
        let predicted = vec![("p1".to_owned(), v(&["eeg"]))];
        let gold = vec![("p2".to_owned(), v(&["eeg"]))];
        assert!(matches!(
            evaluate_corpus(&predicted, &gold),
            Err(Error::Pairing(_))
        ));
        assert!(evaluate_corpus(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn counts_partition_both_canonical_sets(
            predicted in proptest::collection::vec("[a-c]{1,3}", 0..10),
            gold in proptest::collection::vec("[a-c]{1,3}", 0..10),
        ) {
            let counts = match_lists(&predicted, &gold);
            let unique = |items: &[String]| {
                items.iter().map(|s| normalize_term(s)).collect::<HashSet<_>>().len()
            };
            // No short forms possible here, so canonicalization is identity.
            prop_assert_eq!(counts.true_positives + counts.false_positives, unique(&predicted));
            prop_assert_eq!(counts.true_positives + counts.false_negatives, unique(&gold));
        }
    }
}
