//! Definitional validation: a second model pass that rules on each
//! grounded candidate.
//!
//! The prompt shows the candidate in its source document next to a fixed
//! set of four technology definitions plus decision criteria. The model
//! answers with a YAML verdict; a candidate survives only when the verdict
//! says it is a technology with confidence strictly above six on the 1-10
//! scale. Verdicts that cannot be parsed drop the candidate and keep the
//! raw reply in the audit record.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::Gateway;
use crate::prompt::PromptTemplate;

/// Number of definitions a definition set must carry.
pub const DEFINITION_COUNT: usize = 4;

/// Definitions and decision criteria shown to the validator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefinitionSet {
    definitions: Vec<String>,
    criteria: String,
}

impl DefinitionSet {
    pub fn new(definitions: Vec<String>, criteria: String) -> Result<Self> {
        if definitions.len() != DEFINITION_COUNT {
            return Err(Error::Format(format!(
                "expected exactly {DEFINITION_COUNT} definitions, found {}",
                definitions.len()
            )));
        }
        if definitions.iter().any(|d| d.trim().is_empty()) {
            return Err(Error::Format("definitions must be non-empty".into()));
        }
        if criteria.trim().is_empty() {
            return Err(Error::Format("decision criteria must be non-empty".into()));
        }
        Ok(DefinitionSet {
            definitions,
            criteria,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        #[derive(Deserialize)]
        struct File {
            definitions: Vec<String>,
            criteria: String,
        }
        let file: File = serde_yaml::from_str(&raw)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        DefinitionSet::new(file.definitions, file.criteria)
    }

    /// Numbered definitions followed by the criteria block.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, definition) in self.definitions.iter().enumerate() {
            out.push_str(&format!("Definition {}: {}\n\n", i + 1, definition.trim()));
        }
        out.push_str("Decision criteria:\n");
        out.push_str(self.criteria.trim());
        out
    }
}

/// One validator ruling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub is_technology: bool,
    #[serde(default)]
    pub reasoning: String,
    /// 1..=10 after coercion.
    pub confidence: u8,
    pub technology_name: String,
}

impl Verdict {
    /// Keep rule: affirmative and strictly more confident than 6.
    pub fn keep(&self) -> bool {
        self.is_technology && self.confidence > 6
    }
}

pub fn build_validation_prompt(
    template: &PromptTemplate,
    candidate: &str,
    document: &str,
    definitions: &DefinitionSet,
) -> Result<(String, String)> {
    template.require_placeholders(&["candidate", "document", "definitions"])?;
    Ok(template.render(&[
        ("candidate", candidate),
        ("document", document),
        ("definitions", &definitions.render()),
    ]))
}

const VERDICT_KEYS: [&str; 4] = ["is_technology", "reasoning", "confidence", "technology_name"];

fn mapping_region(text: &str) -> Option<String> {
    let lines: Vec<&str> = text.lines().collect();
    let is_key_line = |l: &str| {
        let t = l.trim_start();
        VERDICT_KEYS.iter().any(|k| {
            t.strip_prefix(k)
                .map(|rest| rest.trim_start().starts_with(':'))
                .unwrap_or(false)
        })
    };
    let start = lines.iter().position(|l| is_key_line(l))?;
    let mut end = start;
    for (i, line) in lines.iter().enumerate().skip(start) {
        let continuation = line.starts_with(' ') || line.starts_with('\t');
        if is_key_line(line) || continuation || line.trim().is_empty() {
            end = i;
        } else {
            break;
        }
    }
    Some(lines[start..=end].join("\n"))
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

fn coerce_bool(value: &serde_yaml::Value) -> Option<bool> {
    match value {
        serde_yaml::Value::Bool(b) => Some(*b),
        serde_yaml::Value::String(s) => match s.trim().to_lowercase().as_str() {
            "true" | "yes" => Some(true),
            "false" | "no" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

fn coerce_confidence(value: &serde_yaml::Value) -> Option<u8> {
    let number = match value {
        serde_yaml::Value::Number(n) => n.as_f64(),
        serde_yaml::Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    }?;
    if !number.is_finite() {
        return None;
    }
    Some(number.round().clamp(1.0, 10.0) as u8)
}

fn verdict_from_mapping(map: &serde_yaml::Mapping, fallback_name: &str) -> Option<Verdict> {
    let get = |key: &str| map.get(serde_yaml::Value::String(key.into()));
    let is_technology = coerce_bool(get("is_technology")?)?;
    let confidence = coerce_confidence(get("confidence")?)?;
    let reasoning = get("reasoning")
        .and_then(|v| v.as_str())
        .unwrap_or("")
        .trim()
        .to_owned();
    let technology_name = get("technology_name")
        .and_then(|v| v.as_str())
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .unwrap_or(fallback_name)
        .to_owned();
    Some(Verdict {
        is_technology,
        reasoning,
        confidence,
        technology_name,
    })
}

/// Parse a validator reply. `fallback_name` stands in when the reply
/// omits or blanks `technology_name`.
pub fn parse_verdict(text: &str, fallback_name: &str) -> Result<Verdict> {
    let mut snippets = fenced_blocks(text);
    snippets.push(text.to_owned());
    if let Some(region) = mapping_region(text) {
        snippets.push(region);
    }
    for snippet in &snippets {
        if let Ok(serde_yaml::Value::Mapping(map)) = serde_yaml::from_str(snippet) {
            if let Some(verdict) = verdict_from_mapping(&map, fallback_name) {
                return Ok(verdict);
            }
        }
    }
    Err(Error::VerdictParse {
        message: "no mapping with is_technology and confidence found".into(),
        raw: text.to_owned(),
    })
}

/// Outcome for one candidate, kept for the audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub candidate: String,
    pub kept: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Validator-normalized names of surviving candidates, input order.
    pub kept: Vec<String>,
    pub records: Vec<ValidationRecord>,
}

/// Rule on every candidate of one document.
///
/// Unparseable verdicts drop their candidate but are recorded rather than
/// failing the document; transport and provider errors still propagate.
pub fn definitional_validate(
    gateway: &Gateway,
    template: &PromptTemplate,
    candidates: &[String],
    document: &str,
    definitions: &DefinitionSet,
) -> Result<ValidationReport> {
    let mut kept = Vec::new();
    let mut records = Vec::new();
    for candidate in candidates {
        let (system, user) = build_validation_prompt(template, candidate, document, definitions)?;
        let request = gateway.request(&system, &user);
        let raw = gateway.complete(&request)?;
        match parse_verdict(&raw, candidate) {
            Ok(verdict) => {
                let keep = verdict.keep();
                if keep {
                    kept.push(verdict.technology_name.clone());
                }
                records.push(ValidationRecord {
                    candidate: candidate.clone(),
                    kept: keep,
                    verdict: Some(verdict),
                    error: None,
                });
            }
            Err(Error::VerdictParse { message, raw }) => {
                log::warn!("dropping {candidate:?}: unparseable verdict: {message}");
                records.push(ValidationRecord {
                    candidate: candidate.clone(),
                    kept: false,
                    verdict: None,
                    error: Some(format!("{message}; raw reply: {raw}")),
                });
            }
            Err(other) => return Err(other),
        }
    }
    Ok(ValidationReport { kept, records })
}
