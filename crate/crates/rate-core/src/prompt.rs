//! Versioned prompt templates with placeholder substitution.
//!
//! Templates live on disk as plain text files with labelled sections:
//!
//! ```text
//! === meta ===
//! version: 2
//! === system ===
//! You are ...
//! === user ===
//! ... {{document}} ...
//! ```
//!
//! The `meta` section is optional. Placeholders use `{{name}}` syntax and
//! substitution is literal (no escaping, no nesting).

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub version: String,
    pub system_text: String,
    pub user_text: String,
}

impl PromptTemplate {
    /// Parse a template from its on-disk text form.
    pub fn parse(name: &str, raw: &str) -> Result<Self> {
        let mut sections: HashMap<String, Vec<&str>> = HashMap::new();
        let mut current: Option<String> = None;
        for line in raw.lines() {
            let trimmed = line.trim();
            if let Some(label) = trimmed
                .strip_prefix("===")
                .and_then(|rest| rest.strip_suffix("==="))
            {
                current = Some(label.trim().to_owned());
                sections.entry(label.trim().to_owned()).or_default();
                continue;
            }
            match &current {
                Some(label) => sections.get_mut(label).unwrap().push(line),
                None if trimmed.is_empty() => {}
                None => {
                    return Err(Error::Template(format!(
                        "template {name}: content before the first section header"
                    )))
                }
            }
        }

        let section = |label: &str| -> Option<String> {
            sections.get(label).map(|lines| lines.join("\n").trim().to_owned())
        };
        let system_text = section("system")
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Template(format!("template {name}: missing system section")))?;
        let user_text = section("user")
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Template(format!("template {name}: missing user section")))?;

        let version = section("meta")
            .and_then(|meta| {
                meta.lines().find_map(|l| {
                    l.trim()
                        .strip_prefix("version:")
                        .map(|v| v.trim().to_owned())
                })
            })
            .unwrap_or_else(|| "1".to_owned());

        Ok(PromptTemplate {
            name: name.to_owned(),
            version,
            system_text,
            user_text,
        })
    }

    /// Load a template file; the template name is the file stem.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "template".to_owned());
        Self::parse(&name, &raw)
    }

    /// Check that every placeholder in `required` appears in the user text.
    pub fn require_placeholders(&self, required: &[&str]) -> Result<()> {
        for name in required {
            let marker = format!("{{{{{name}}}}}");
            if !self.user_text.contains(&marker) && !self.system_text.contains(&marker) {
                return Err(Error::Template(format!(
                    "template {}: missing placeholder {marker}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Substitute `{{name}}` placeholders in both sections.
    pub fn render(&self, vars: &[(&str, &str)]) -> (String, String) {
        let substitute = |text: &str| {
            let mut out = text.to_owned();
            for (name, value) in vars {
                out = out.replace(&format!("{{{{{name}}}}}"), value);
            }
            out
        };
        (substitute(&self.system_text), substitute(&self.user_text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RAW: &str = "=== meta ===\nversion: 3\n=== system ===\nBe terse.\n=== user ===\nDoc: {{document}}\nCtx: {{context}}\n";

    #[test]
    fn parses_sections_and_version() {
        let t = PromptTemplate::parse("extraction", RAW).unwrap();
        assert_eq!(t.version, "3");
        assert_eq!(t.system_text, "Be terse.");
        assert!(t.user_text.contains("{{document}}"));
    }

    #[test]
    fn version_defaults_to_one() {
        let t =
            PromptTemplate::parse("x", "=== system ===\ns\n=== user ===\nu {{document}}").unwrap();
        assert_eq!(t.version, "1");
    }

    #[test]
    fn missing_user_section_errors() {
        let err = PromptTemplate::parse("x", "=== system ===\ns\n").unwrap_err();
        assert!(matches!(err, Error::Template(_)));
    }

    #[test]
    fn require_placeholders_flags_absences() {
        let t = PromptTemplate::parse("extraction", RAW).unwrap();
        assert!(t.require_placeholders(&["document", "context"]).is_ok());
        assert!(t.require_placeholders(&["candidate"]).is_err());
    }

    #[test]
    fn render_substitutes_all_occurrences() {
        let t = PromptTemplate::parse("extraction", RAW).unwrap();
        let (_, user) = t.render(&[("document", "X uses EEG."), ("context", "none")]);
        assert!(user.contains("Doc: X uses EEG."));
        assert!(user.contains("Ctx: none"));
    }
}
