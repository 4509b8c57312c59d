//! Pipeline configuration.
//!
//! The TOML file is validated as a whole before anything runs: unknown
//! keys, type mismatches, missing required keys, and out-of-range values
//! are all collected and reported together. Relative paths are resolved
//! against the directory containing the config file. The API key is never
//! read from the file; the HTTP provider takes it from `RATE_API_KEY`.

use std::fmt;
use std::path::{Path, PathBuf};

use rate_core::heuristic::GroundingThresholds;

#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for issue in &self.0 {
            writeln!(f, "  - {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    Http,
    Mock,
}

#[derive(Debug, Clone)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub base_url: Option<String>,
    pub completion_model: String,
    pub embedding_model: String,
    pub max_concurrency: usize,
    pub retry_attempts: u32,
}

#[derive(Debug, Clone)]
pub struct KbConfig {
    pub catalog: Option<PathBuf>,
    pub chunk_size: usize,
    pub chunk_overlap: usize,
    pub retrieve_k: usize,
    pub diversity_target: usize,
}

#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub min_weighted_degree: u64,
    pub louvain_seed: u64,
    pub girvan_newman_max_edges: usize,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub corpus_input: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub provider: ProviderConfig,
    pub kb: KbConfig,
    pub extraction_template: Option<PathBuf>,
    pub confidence_threshold: f64,
    pub grounding: GroundingThresholds,
    pub validation_template: Option<PathBuf>,
    pub definitions: Option<PathBuf>,
    pub blocklist: Option<PathBuf>,
    pub network: NetworkConfig,
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("corpus", &["input", "gold"]),
    ("output", &["dir", "cache_dir"]),
    (
        "provider",
        &[
            "kind",
            "base_url",
            "completion_model",
            "embedding_model",
            "max_concurrency",
            "retry_attempts",
        ],
    ),
    (
        "kb",
        &["catalog", "chunk_size", "chunk_overlap", "retrieve_k", "diversity_target"],
    ),
    ("extraction", &["template", "confidence_threshold"]),
    (
        "grounding",
        &["compound_ratio", "high_confidence", "similarity_confidence", "similarity"],
    ),
    ("validation", &["template", "definitions"]),
    ("postprocess", &["blocklist"]),
    (
        "network",
        &["min_weighted_degree", "louvain_seed", "girvan_newman_max_edges"],
    ),
];

struct Checker<'a> {
    root: &'a toml::Table,
    issues: Vec<String>,
}

impl<'a> Checker<'a> {
    fn table(&self, name: &str) -> Option<&'a toml::Table> {
        self.root.get(name).and_then(toml::Value::as_table)
    }

    fn value(&self, table: &str, key: &str) -> Option<&'a toml::Value> {
        self.table(table).and_then(|t| t.get(key))
    }

    fn string(&mut self, table: &str, key: &str) -> Option<String> {
        let value = self.value(table, key)?;
        match value.as_str() {
            Some(s) => Some(s.to_owned()),
            None => {
                self.issues.push(format!("{table}.{key} must be a string"));
                None
            }
        }
    }

    fn unsigned(&mut self, table: &str, key: &str) -> Option<u64> {
        let value = self.value(table, key)?;
        match value.as_integer() {
            Some(i) if i >= 0 => Some(i as u64),
            _ => {
                self.issues
                    .push(format!("{table}.{key} must be a non-negative integer"));
                None
            }
        }
    }

    fn float(&mut self, table: &str, key: &str) -> Option<f64> {
        let value = self.value(table, key)?;
        match value {
            toml::Value::Float(f) => Some(*f),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => {
                self.issues.push(format!("{table}.{key} must be a number"));
                None
            }
        }
    }

    fn ratio(&mut self, table: &str, key: &str, default: f64) -> f64 {
        match self.float(table, key) {
            Some(v) if (0.0..=1.0).contains(&v) => v,
            Some(v) => {
                self.issues
                    .push(format!("{table}.{key} must lie in [0, 1], got {v}"));
                default
            }
            None => default,
        }
    }

    fn check_unknown_keys(&mut self) {
        for (key, value) in self.root {
            match SCHEMA.iter().find(|(table, _)| table == key) {
                None => self.issues.push(format!("unknown table `{key}`")),
                Some((table, known)) => match value.as_table() {
                    None => self.issues.push(format!("`{table}` must be a table")),
                    Some(entries) => {
                        for entry in entries.keys() {
                            if !known.contains(&entry.as_str()) {
                                self.issues.push(format!("unknown key `{table}.{entry}`"));
                            }
                        }
                    }
                },
            }
        }
    }
}

pub fn load(path: &Path) -> Result<Config, ConfigError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(vec![format!("cannot read {}: {e}", path.display())]))?;
    let root: toml::Table =
        toml::from_str(&raw).map_err(|e| ConfigError(vec![format!("parse error: {e}")]))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_owned();
    from_table(&root, &base)
}

fn from_table(root: &toml::Table, base: &Path) -> Result<Config, ConfigError> {
    let mut c = Checker {
        root,
        issues: Vec::new(),
    };
    c.check_unknown_keys();

    let resolve = |p: String| -> PathBuf {
        let p = PathBuf::from(p);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };

    let corpus_input = c.string("corpus", "input").map(resolve);
    let gold = c.string("corpus", "gold").map(resolve);

    let output_dir = match c.string("output", "dir") {
        Some(dir) => resolve(dir),
        None => {
            c.issues.push("output.dir is required".into());
            PathBuf::from(".")
        }
    };
    let cache_dir = c
        .string("output", "cache_dir")
        .map(resolve)
        .unwrap_or_else(|| output_dir.join("cache"));

    let kind = match c.string("provider", "kind").as_deref() {
        Some("http") => ProviderKind::Http,
        Some("mock") => ProviderKind::Mock,
        Some(other) => {
            c.issues
                .push(format!("provider.kind must be \"http\" or \"mock\", got {other:?}"));
            ProviderKind::Mock
        }
        None => {
            c.issues.push("provider.kind is required".into());
            ProviderKind::Mock
        }
    };
    let base_url = c.string("provider", "base_url");
    if kind == ProviderKind::Http && base_url.is_none() {
        c.issues
            .push("provider.base_url is required when provider.kind = \"http\"".into());
    }
    let completion_model = c
        .string("provider", "completion_model")
        .unwrap_or_else(|| "rate-extractor".into());
    let embedding_model = c
        .string("provider", "embedding_model")
        .unwrap_or_else(|| "rate-embedder".into());
    let max_concurrency = c.unsigned("provider", "max_concurrency").unwrap_or(4) as usize;
    if max_concurrency == 0 {
        c.issues.push("provider.max_concurrency must be >= 1".into());
    }
    let retry_attempts = c.unsigned("provider", "retry_attempts").unwrap_or(3) as u32;
    if retry_attempts == 0 {
        c.issues.push("provider.retry_attempts must be >= 1".into());
    }

    let catalog = c.string("kb", "catalog").map(resolve);
    let chunk_size = c.unsigned("kb", "chunk_size").unwrap_or(512) as usize;
    let chunk_overlap = c.unsigned("kb", "chunk_overlap").unwrap_or(64) as usize;
    if chunk_size == 0 {
        c.issues.push("kb.chunk_size must be >= 1".into());
    } else if chunk_overlap >= chunk_size {
        c.issues.push(format!(
            "kb.chunk_overlap ({chunk_overlap}) must be smaller than kb.chunk_size ({chunk_size})"
        ));
    }
    let retrieve_k = c.unsigned("kb", "retrieve_k").unwrap_or(20) as usize;
    if retrieve_k == 0 {
        c.issues.push("kb.retrieve_k must be >= 1".into());
    }
    let diversity_target = c.unsigned("kb", "diversity_target").unwrap_or(7) as usize;
    if diversity_target == 0 {
        c.issues.push("kb.diversity_target must be >= 1".into());
    }

    let extraction_template = c.string("extraction", "template").map(resolve);
    let confidence_threshold = c.ratio("extraction", "confidence_threshold", 0.7);

    let grounding = GroundingThresholds {
        compound_ratio: c.ratio("grounding", "compound_ratio", 0.75),
        high_confidence: c.ratio("grounding", "high_confidence", 0.95),
        similarity_confidence: c.ratio("grounding", "similarity_confidence", 0.75),
        similarity: c.ratio("grounding", "similarity", 0.70),
    };

    let validation_template = c.string("validation", "template").map(resolve);
    let definitions = c.string("validation", "definitions").map(resolve);
    let blocklist = c.string("postprocess", "blocklist").map(resolve);

    let network = NetworkConfig {
        min_weighted_degree: c.unsigned("network", "min_weighted_degree").unwrap_or(10),
        louvain_seed: c.unsigned("network", "louvain_seed").unwrap_or(42),
        girvan_newman_max_edges: c
            .unsigned("network", "girvan_newman_max_edges")
            .unwrap_or(2000) as usize,
    };

    if !c.issues.is_empty() {
        return Err(ConfigError(c.issues));
    }
    Ok(Config {
        corpus_input,
        gold,
        output_dir,
        cache_dir,
        provider: ProviderConfig {
            kind,
            base_url,
            completion_model,
            embedding_model,
            max_concurrency,
            retry_attempts,
        },
        kb: KbConfig {
            catalog,
            chunk_size,
            chunk_overlap,
            retrieve_k,
            diversity_target,
        },
        extraction_template,
        confidence_threshold,
        grounding,
        validation_template,
        definitions,
        blocklist,
        network,
    })
}
