//! On-disk artifacts shared between pipeline stages.
//!
//! Every stage writes one JSONL file per artifact, keyed by `paper_id`, in
//! corpus order. Files are written atomically (temp file + rename) so an
//! interrupted run never leaves a half-written artifact behind.

use std::collections::BTreeMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use rate_core::extract::Candidate;
use rate_core::heuristic::GroundingDecision;
use rate_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const DOCUMENTS: &str = "documents.jsonl";
pub const KB_INDEX: &str = "kb_index.json";
pub const CANDIDATES: &str = "candidates.jsonl";
pub const GROUNDED: &str = "grounded.jsonl";
pub const VALIDATED: &str = "validated.jsonl";
pub const FINAL_TERMS: &str = "final.jsonl";
pub const FINAL_CSV: &str = "final.csv";
pub const EVALUATION: &str = "evaluation.json";
pub const NETWORK_GEXF: &str = "network.gexf";
pub const NETWORK_GRAPHML: &str = "network.graphml";
pub const NETWORK_CSV: &str = "network.csv";
pub const NETWORK_STATS: &str = "network_stats.json";

/// Candidates extracted for one paper.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateRow {
    pub paper_id: String,
    pub candidates: Vec<Candidate>,
}

/// One candidate together with its grounding outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundedCandidate {
    pub phrase: String,
    pub confidence: f64,
    #[serde(flatten)]
    pub decision: GroundingDecision,
}

/// Grounding results for one paper.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundedRow {
    pub paper_id: String,
    pub candidates: Vec<GroundedCandidate>,
}

/// Validation verdicts for one paper.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidatedRow {
    pub paper_id: String,
    pub kept: Vec<String>,
    pub records: Vec<rate_core::definitional::ValidationRecord>,
}

/// Final cleaned technology list for one paper.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalRow {
    pub paper_id: String,
    pub terms: Vec<String>,
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn temp_path(target: &Path) -> PathBuf {
    let n = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let mut name = target.file_name().unwrap_or_default().to_owned();
    name.push(format!(".tmp.{}.{n}", std::process::id()));
    target.with_file_name(name)
}

/// Writes `bytes` to `path` atomically via a sibling temp file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = temp_path(path);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Serializes rows as JSON Lines and writes them atomically.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = BufWriter::new(&mut buf);
        for row in rows {
            serde_json::to_writer(&mut w, row)
                .map_err(|e| Error::Format(format!("serializing {}: {e}", path.display())))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    write_atomic(path, &buf)
}

/// Reads a JSONL artifact, reporting the offending line on parse errors.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| Error::Record {
            line: i + 1,
            message: format!("{}: {e}", path.display()),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Loads a keyed artifact into a map for resumable stages. Missing file
/// means nothing has been computed yet; duplicate ids are an error.
pub fn load_keyed<T, F>(path: &Path, key: F) -> Result<BTreeMap<String, T>>
where
    T: DeserializeOwned,
    F: Fn(&T) -> String,
{
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let rows: Vec<T> = read_jsonl(path)?;
    let mut map = BTreeMap::new();
    for row in rows {
        let id = key(&row);
        if map.insert(id.clone(), row).is_some() {
            return Err(Error::Format(format!(
                "duplicate paper_id {id:?} in {}",
                path.display()
            )));
        }
    }
    Ok(map)
}

/// Serializes a value as pretty JSON with a trailing newline, atomically.
pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Format(format!("serializing {}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
