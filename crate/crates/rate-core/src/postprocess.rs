//! Final cleanup of validated technology names.
//!
//! Names are lowercased and whitespace-collapsed, deduplicated, screened
//! against a blocklist of generic non-technologies, reduced to their
//! abbreviated forms when both a long and short form survived, and sorted.
//! The whole pipeline is idempotent: running it on its own output changes
//! nothing.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::heuristic::derive_acronym;

/// Lowercase, trim, and collapse internal whitespace.
pub fn normalize_term(term: &str) -> String {
    term.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Normalize every term, drop empties, keep first occurrences.
pub fn normalize_and_dedup(terms: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    terms
        .iter()
        .map(|t| normalize_term(t))
        .filter(|t| !t.is_empty())
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

/// Load a blocklist: one normalized term per line, `#` comments allowed.
pub fn load_blocklist(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(normalize_term)
        .collect())
}

pub fn apply_blocklist(terms: Vec<String>, blocklist: &HashSet<String>) -> Vec<String> {
    terms
        .into_iter()
        .filter(|t| !blocklist.contains(t))
        .collect()
}

/// Short form embedded in an already-lowercased term, e.g.
/// "electroencephalography (eeg)" yields "eeg". Unlike the grounding
/// check this has no uppercase requirement, because postprocessed terms
/// have lost their case.
fn embedded_short_form(term: &str) -> Option<String> {
    let trimmed = term.trim_end();
    let rest = trimmed.strip_suffix(')')?;
    let open = rest.rfind('(')?;
    let inner = &rest[open + 1..];
    let base = rest[..open].trim();
    let count = inner.chars().count();
    if base.is_empty() || !(2..=10).contains(&count) || !inner.chars().all(char::is_alphanumeric) {
        return None;
    }
    Some(inner.to_owned())
}

/// The short form a term would collapse to, if any: an embedded
/// parenthesized abbreviation first, derived initials otherwise.
pub fn short_form(term: &str) -> Option<String> {
    embedded_short_form(term).or_else(|| derive_acronym(term).map(|a| a.to_lowercase()))
}

/// When both forms of the same technology survived ("brain computer
/// interface" next to "bci"), keep only the abbreviated one.
pub fn acronym_priority_dedup(terms: Vec<String>) -> Vec<String> {
    let present: HashSet<String> = terms.iter().cloned().collect();
    terms
        .into_iter()
        .filter(|term| match short_form(term) {
            Some(short) => short == *term || !present.contains(&short),
            None => true,
        })
        .collect()
}

/// Normalize, dedup, blocklist, collapse to short forms, sort.
pub fn finalize(terms: &[String], blocklist: &HashSet<String>) -> Vec<String> {
    let cleaned = normalize_and_dedup(terms);
    let screened = apply_blocklist(cleaned, blocklist);
    let mut reduced = acronym_priority_dedup(screened);
    reduced.sort();
    reduced
}
