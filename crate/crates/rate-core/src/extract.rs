//! Candidate technology extraction from one document.
//!
//! The document and retrieved reference context are rendered into the
//! extraction prompt; the model is expected to answer with a YAML list of
//! `{phrase, confidence}` items. Real model output drifts, so the parser
//! accepts fenced or bare YAML, prose around the list, plain-string items,
//! and missing fields — anything it cannot read as a list at all is a
//! parse error carrying the raw text for the audit trail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::Gateway;
use crate::prompt::PromptTemplate;

/// Minimum extraction confidence a candidate needs to move forward.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.7;

/// Text substituted for the context placeholder when retrieval found
/// nothing.
pub const NO_CONTEXT: &str = "NO CONTEXT DOCUMENTS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub phrase: String,
    pub confidence: f64,
}

/// Number the retrieved chunks for the prompt, or say there are none.
pub fn render_context(chunks: &[String]) -> String {
    if chunks.is_empty() {
        return NO_CONTEXT.into();
    }
    chunks
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{}. {}", i + 1, c))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Render the extraction template for one document.
pub fn build_extraction_prompt(
    template: &PromptTemplate,
    document: &str,
    context_chunks: &[String],
) -> Result<(String, String)> {
    template.require_placeholders(&["document", "context"])?;
    let context = render_context(context_chunks);
    Ok(template.render(&[("document", document), ("context", &context)]))
}

fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let Some(newline) = after.find('\n') else { break };
        let body = &after[newline + 1..];
        let Some(close) = body.find("```") else { break };
        blocks.push(body[..close].to_owned());
        rest = &body[close + 3..];
    }
    blocks
}

/// The region of `text` that looks like a YAML list: from the first list
/// item through the last consecutive item, continuation, or blank line.
fn list_region(text: &str) -> Option<String> {
    let lines: Vec<&str> = text.lines().collect();
    let is_item = |l: &str| {
        let t = l.trim_start();
        t == "-" || t.starts_with("- ")
    };
    let start = lines.iter().position(|l| is_item(l))?;
    let mut end = start;
    for (i, line) in lines.iter().enumerate().skip(start) {
        let blank = line.trim().is_empty();
        let continuation = line.starts_with(' ') || line.starts_with('\t');
        if is_item(line) || blank || continuation {
            end = i;
        } else {
            break;
        }
    }
    Some(lines[start..=end].join("\n"))
}

fn string_of(value: &serde_yaml::Value) -> Option<String> {
    match value {
        serde_yaml::Value::String(s) => Some(s.clone()),
        serde_yaml::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn number_of(value: &serde_yaml::Value) -> Option<f64> {
    match value {
        serde_yaml::Value::Number(n) => n.as_f64(),
        serde_yaml::Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn lookup<'v>(map: &'v serde_yaml::Mapping, keys: &[&str]) -> Option<&'v serde_yaml::Value> {
    keys.iter()
        .find_map(|k| map.get(serde_yaml::Value::String((*k).into())))
}

fn candidate_from_value(value: &serde_yaml::Value) -> Option<Candidate> {
    match value {
        serde_yaml::Value::String(s) if !s.trim().is_empty() => {
            log::warn!("candidate item {s:?} has no confidence; assuming 0.0");
            Some(Candidate {
                phrase: s.trim().to_owned(),
                confidence: 0.0,
            })
        }
        serde_yaml::Value::Mapping(map) => {
            let phrase = lookup(map, &["phrase", "term", "name"])
                .and_then(string_of)
                .map(|s| s.trim().to_owned())
                .filter(|s| !s.is_empty());
            let Some(phrase) = phrase else {
                log::warn!("dropping candidate item without a phrase: {value:?}");
                return None;
            };
            let confidence = match lookup(map, &["confidence", "score"]).and_then(number_of) {
                Some(c) if c.is_finite() => c.clamp(0.0, 1.0),
                Some(_) | None => {
                    log::warn!("candidate {phrase:?} has no usable confidence; assuming 0.0");
                    0.0
                }
            };
            Some(Candidate { phrase, confidence })
        }
        _ => {
            log::warn!("dropping unrecognized candidate item: {value:?}");
            None
        }
    }
}

/// Parse model output into candidates.
///
/// Tries fenced code blocks first, then the whole text, then the first
/// list-shaped region. Returns an error only when no YAML list can be
/// found anywhere.
pub fn parse_candidate_output(text: &str) -> Result<Vec<Candidate>> {
    let mut snippets = fenced_blocks(text);
    snippets.push(text.to_owned());
    if let Some(region) = list_region(text) {
        snippets.push(region);
    }
    for snippet in &snippets {
        if let Ok(values) = serde_yaml::from_str::<Vec<serde_yaml::Value>>(snippet) {
            return Ok(values.iter().filter_map(candidate_from_value).collect());
        }
    }
    Err(Error::CandidateParse {
        raw: text.to_owned(),
    })
}

/// Drop candidates below `threshold` (inclusive keep) and merge duplicates
/// that differ only by case, keeping the first spelling and the highest
/// confidence.
pub fn filter_candidates(candidates: Vec<Candidate>, threshold: f64) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = Vec::new();
    let mut position: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    for candidate in candidates {
        if candidate.confidence < threshold {
            continue;
        }
        let key = candidate.phrase.to_lowercase();
        match position.get(&key) {
            Some(&i) => {
                if candidate.confidence > out[i].confidence {
                    out[i].confidence = candidate.confidence;
                }
            }
            None => {
                position.insert(key, out.len());
                out.push(candidate);
            }
        }
    }
    out
}

/// Full extraction step for one document: prompt, complete, parse, filter.
pub fn extract_candidates(
    gateway: &Gateway,
    template: &PromptTemplate,
    document: &str,
    context_chunks: &[String],
    threshold: f64,
) -> Result<Vec<Candidate>> {
    let (system, user) = build_extraction_prompt(template, document, context_chunks)?;
    let request = gateway.request(&system, &user);
    let raw = gateway.complete(&request)?;
    let parsed = parse_candidate_output(&raw)?;
    Ok(filter_candidates(parsed, threshold))
}
