//! Deterministic grounding of candidate phrases against their source text.
//!
//! A candidate survives when one of four checks passes, tried strictly in
//! order: literal occurrence (including its expanded/abbreviated forms),
//! compound token coverage, very high extraction confidence, or semantic
//! similarity as a last resort. The first rule that fires decides; later
//! rules are not consulted, and the similarity callback is only invoked
//! when rule four is actually reached.

use std::collections::HashSet;

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::error::Result;

static STOPWORDS: Lazy<HashSet<&'static str>> = Lazy::new(|| {
    include_str!("../assets/stopwords.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
});

/// True for common English function words ("of", "the", ...). Expects
/// lowercase input.
pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(word)
}

/// Lowercased maximal alphanumeric runs, in order. Hyphens, punctuation and
/// whitespace all separate tokens, so "EEG-based" and "eeg based" tokenize
/// identically.
pub fn word_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Position of `phrase` as a contiguous token run inside `tokens`, if any.
pub fn find_phrase(tokens: &[String], phrase: &str) -> Option<usize> {
    let needle = word_tokens(phrase);
    if needle.is_empty() || tokens.len() < needle.len() {
        return None;
    }
    (0..=tokens.len() - needle.len()).find(|&i| tokens[i..i + needle.len()] == needle[..])
}

/// Whole-word, case-insensitive occurrence check.
pub fn phrase_occurs(tokens: &[String], phrase: &str) -> bool {
    find_phrase(tokens, phrase).is_some()
}

/// Split "long form (SHORT)" into both parts.
///
/// The parenthesized tail must be 2..=10 alphanumeric characters with at
/// least 60% uppercase letters, and a non-empty long form must precede it.
pub fn split_base_and_acronym(phrase: &str) -> Option<(String, String)> {
    let trimmed = phrase.trim_end();
    let rest = trimmed.strip_suffix(')')?;
    let open = rest.rfind('(')?;
    let inner = &rest[open + 1..];
    let base = rest[..open].trim();
    if base.is_empty() {
        return None;
    }
    let chars: Vec<char> = inner.chars().collect();
    if chars.len() < 2 || chars.len() > 10 || !chars.iter().all(|c| c.is_alphanumeric()) {
        return None;
    }
    let upper = chars.iter().filter(|c| c.is_uppercase()).count();
    if (upper as f64) / (chars.len() as f64) < 0.6 {
        return None;
    }
    Some((base.to_owned(), inner.to_owned()))
}

/// Uppercased initials of the phrase's meaningful words, or `None` when
/// fewer than two words contribute. Stopwords never contribute an initial.
pub fn derive_acronym(phrase: &str) -> Option<String> {
    let initials: Vec<char> = phrase
        .split(|c: char| c.is_whitespace() || c == '-')
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty() && !is_stopword(w.to_lowercase().as_str()))
        .filter_map(|w| w.chars().next())
        .flat_map(|c| c.to_uppercase())
        .collect();
    if initials.len() < 2 {
        return None;
    }
    Some(initials.into_iter().collect())
}

/// Fraction of the phrase's meaningful (non-stopword) tokens that appear
/// somewhere in the document's token set. Zero when nothing meaningful
/// remains.
pub fn compound_match_ratio(phrase: &str, token_set: &HashSet<&str>) -> f64 {
    let meaningful: Vec<String> = word_tokens(phrase)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .collect();
    if meaningful.is_empty() {
        return 0.0;
    }
    let present = meaningful
        .iter()
        .filter(|t| token_set.contains(t.as_str()))
        .count();
    present as f64 / meaningful.len() as f64
}

/// Which check grounded (or rejected) a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundingRule {
    Exact,
    BaseOrAcronym,
    Compound,
    HighConfidence,
    Similarity,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingDecision {
    pub rule: GroundingRule,
    /// Supporting measurement where one exists: token coverage for
    /// compound matches, extraction confidence for high-confidence
    /// acceptance, cosine similarity when rule four was consulted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl GroundingDecision {
    fn accept(rule: GroundingRule, score: Option<f64>) -> Self {
        GroundingDecision { rule, score }
    }

    pub fn accepted(&self) -> bool {
        self.rule != GroundingRule::Rejected
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundingThresholds {
    /// Minimum token coverage for multi-word phrases (rule two).
    pub compound_ratio: f64,
    /// Extraction confidence accepted on its own (rule three).
    pub high_confidence: f64,
    /// Confidence floor below which rule four is not even consulted.
    pub similarity_confidence: f64,
    /// Minimum cosine similarity for rule four.
    pub similarity: f64,
}

impl Default for GroundingThresholds {
    fn default() -> Self {
        GroundingThresholds {
            compound_ratio: 0.75,
            high_confidence: 0.95,
            similarity_confidence: 0.75,
            similarity: 0.70,
        }
    }
}

/// Run the four-rule cascade for one candidate phrase.
///
/// `similarity` is called at most once, and only when rules one to three
/// all fail and the confidence qualifies for the semantic fallback.
pub fn heuristic_validate<F>(
    phrase: &str,
    confidence: f64,
    document: &str,
    thresholds: &GroundingThresholds,
    mut similarity: F,
) -> Result<GroundingDecision>
where
    F: FnMut(&str, &str) -> Result<f64>,
{
    let tokens = word_tokens(document);

    // Rule one: the phrase itself, its long form, its embedded short form,
    // or its derivable initials occur literally in the text.
    if phrase_occurs(&tokens, phrase) {
        return Ok(GroundingDecision::accept(GroundingRule::Exact, None));
    }
    if let Some((base, acronym)) = split_base_and_acronym(phrase) {
        if phrase_occurs(&tokens, &base) || phrase_occurs(&tokens, &acronym) {
            return Ok(GroundingDecision::accept(GroundingRule::BaseOrAcronym, None));
        }
    }
    if let Some(acronym) = derive_acronym(phrase) {
        if phrase_occurs(&tokens, &acronym) {
            return Ok(GroundingDecision::accept(GroundingRule::BaseOrAcronym, None));
        }
    }

    // Rule two: most meaningful words of a compound phrase are present.
    if word_tokens(phrase).len() >= 2 {
        let token_set: HashSet<&str> = tokens.iter().map(String::as_str).collect();
        let ratio = compound_match_ratio(phrase, &token_set);
        if ratio >= thresholds.compound_ratio {
            return Ok(GroundingDecision::accept(GroundingRule::Compound, Some(ratio)));
        }
    }

    // Rule three: the extractor was nearly certain.
    if confidence >= thresholds.high_confidence {
        return Ok(GroundingDecision::accept(
            GroundingRule::HighConfidence,
            Some(confidence),
        ));
    }

    // Rule four: semantic fallback, gated on confidence.
    if confidence >= thresholds.similarity_confidence {
        let sim = similarity(phrase, document)?;
        if sim >= thresholds.similarity {
            return Ok(GroundingDecision::accept(GroundingRule::Similarity, Some(sim)));
        }
        return Ok(GroundingDecision {
            rule: GroundingRule::Rejected,
            score: Some(sim),
        });
    }

    Ok(GroundingDecision {
        rule: GroundingRule::Rejected,
        score: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn no_similarity(_: &str, _: &str) -> Result<f64> {
        panic!("similarity must not be consulted");
    }

    fn validate(phrase: &str, confidence: f64, document: &str) -> GroundingDecision {
        heuristic_validate(
            phrase,
            confidence,
            document,
            &GroundingThresholds::default(),
            no_similarity,
        )
        .unwrap()
    }

    fn validate_sim(phrase: &str, confidence: f64, document: &str, sim: f64) -> GroundingDecision {
        heuristic_validate(
            phrase,
            confidence,
            document,
            &GroundingThresholds::default(),
            |_, _| Ok(sim),
        )
        .unwrap()
    }

    #[test]
    fn tokenizer_lowercases_and_splits_on_punctuation() {
        assert_eq!(
            word_tokens("EEG-based system, 2021!"),
            vec!["eeg", "based", "system", "2021"]
        );
        assert!(word_tokens("--- ...").is_empty());
    }

    #[test]
    fn occurrence_is_whole_word_and_hyphen_insensitive() {
        let tokens = word_tokens("A Brain-Computer Interface for artifact removal.");
        assert!(phrase_occurs(&tokens, "brain computer interface"));
        assert!(phrase_occurs(&tokens, "Brain-Computer Interface"));
        assert!(phrase_occurs(&tokens, "artifact"));
        assert!(!phrase_occurs(&tokens, "art"));
        assert!(!phrase_occurs(&tokens, "interface removal"));
    }

    #[test]
    fn embedded_acronym_splitting() {
        assert_eq!(
            split_base_and_acronym("electroencephalography (EEG)"),
            Some(("electroencephalography".into(), "EEG".into()))
        );
        assert_eq!(
            split_base_and_acronym("functional MRI (fMRI)"),
            Some(("functional MRI".into(), "fMRI".into()))
        );
        assert_eq!(split_base_and_acronym("(EEG)"), None, "needs a long form");
        assert_eq!(split_base_and_acronym("x (E)"), None, "too short");
        assert_eq!(split_base_and_acronym("tool (toolbox)"), None, "not upper enough");
        assert_eq!(split_base_and_acronym("plain phrase"), None);
    }

    #[test]
    fn acronym_derivation_skips_stopwords() {
        assert_eq!(derive_acronym("brain computer interface"), Some("BCI".into()));
        assert_eq!(derive_acronym("support-vector machine"), Some("SVM".into()));
        assert_eq!(derive_acronym("internet of things"), Some("IT".into()));
        assert_eq!(derive_acronym("electroencephalography"), None);
        assert_eq!(derive_acronym("of the"), None);
    }

    #[test]
    fn compound_ratio_counts_meaningful_tokens_only() {
        let doc = word_tokens("deep neural stimulation methods");
        let set: HashSet<&str> = doc.iter().map(String::as_str).collect();
        let ratio = compound_match_ratio("deep brain stimulation", &set);
        assert!((ratio - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(compound_match_ratio("of the", &set), 0.0);
    }

    #[test]
    fn rule_one_exact_match_wins_before_anything_else() {
        let d = validate("virtual reality", 0.1, "We use Virtual Reality headsets.");
        assert_eq!(d.rule, GroundingRule::Exact);
        assert!(d.accepted());
    }

    #[test]
    fn rule_one_accepts_long_form_short_form_and_initials() {
        let doc = "Electroencephalography recordings were collected.";
        let d = validate("electroencephalography (EEG)", 0.2, doc);
        assert_eq!(d.rule, GroundingRule::BaseOrAcronym);

        let doc = "Resting EEG was recorded.";
        let d = validate("electroencephalography (EEG)", 0.2, doc);
        assert_eq!(d.rule, GroundingRule::BaseOrAcronym);

        let doc = "The BCI decoded motor imagery.";
        let d = validate("brain computer interface", 0.2, doc);
        assert_eq!(d.rule, GroundingRule::BaseOrAcronym);
    }

    #[test]
    fn rule_two_boundary_is_inclusive_at_three_quarters() {
        // Three of four meaningful tokens present: ratio exactly 0.75.
        let doc = "convolutional neural network training";
        let pass = validate("deep convolutional neural network", 0.1, doc);
        assert_eq!(pass.rule, GroundingRule::Compound);
        assert_eq!(pass.score, Some(0.75));

        // Two of three present (~0.667) stays below the line.
        let fail = validate("deep spiking network", 0.1, "network deep training");
        assert_eq!(fail.rule, GroundingRule::Rejected);
    }

    #[test]
    fn rule_three_boundary_is_inclusive_at_ninety_five() {
        let kept = validate("quantum flux capacitor", 0.95, "unrelated text");
        assert_eq!(kept.rule, GroundingRule::HighConfidence);
        assert_eq!(kept.score, Some(0.95));

        let not_kept = validate_sim("quantum flux capacitor", 0.949, "unrelated text", 0.0);
        assert_eq!(not_kept.rule, GroundingRule::Rejected);
    }

    #[test]
    fn rule_four_needs_both_confidence_and_similarity() {
        let kept = validate_sim("neurofeedback loop", 0.75, "unrelated text", 0.70);
        assert_eq!(kept.rule, GroundingRule::Similarity);
        assert_eq!(kept.score, Some(0.70));

        let low_sim = validate_sim("neurofeedback loop", 0.75, "unrelated text", 0.699);
        assert_eq!(low_sim.rule, GroundingRule::Rejected);
        assert_eq!(low_sim.score, Some(0.699));

        // Below the confidence gate the callback must never run.
        let skipped = validate("neurofeedback loop", 0.749, "unrelated text");
        assert_eq!(skipped.rule, GroundingRule::Rejected);
        assert_eq!(skipped.score, None);
    }

    #[test]
    fn similarity_is_not_consulted_when_earlier_rules_fire() {
        let mut calls = 0;
        let d = heuristic_validate(
            "eye tracking",
            0.99,
            "Eye tracking hardware was used.",
            &GroundingThresholds::default(),
            |_, _| {
                calls += 1;
                Ok(1.0)
            },
        )
        .unwrap();
        assert_eq!(d.rule, GroundingRule::Exact);
        assert_eq!(calls, 0);
    }

    #[test]
    fn similarity_errors_propagate() {
        let err = heuristic_validate(
            "neurofeedback loop",
            0.80,
            "unrelated text",
            &GroundingThresholds::default(),
            |_, _| Err(crate::Error::Provider("down".into())),
        );
        assert!(err.is_err());
    }

    proptest! {
        #[test]
        fn decision_is_invariant_under_whitespace_renormalization(
            words in proptest::collection::vec("[a-z]{1,8}", 1..20),
            confidence in 0.0f64..1.0,
        ) {
            let phrase = "sample phrase";
            let doc = words.join(" ");
            let noisy = words.join("  \t");
            let a = validate_sim(phrase, confidence, &doc, 0.0);
            let b = validate_sim(phrase, confidence, &noisy, 0.0);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn phrases_lifted_from_the_document_always_ground_exactly(
            words in proptest::collection::vec("[a-z0-9]{1,8}", 3..15),
            start in 0usize..3,
            len in 1usize..3,
        ) {
            let doc = words.join(" ");
            let end = (start + len).min(words.len());
            let phrase = words[start..end].join(" ");
            let d = validate(&phrase, 0.0, &doc);
            prop_assert_eq!(d.rule, GroundingRule::Exact);
        }
    }
}
