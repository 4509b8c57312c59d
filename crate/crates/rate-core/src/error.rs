//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Structural problem with an input file (bad header, wrong shape).
    #[error("format error: {0}")]
    Format(String),

    /// Input bytes are not valid UTF-8.
    #[error("invalid utf-8 at byte offset {offset}")]
    Encoding { offset: usize },

    /// A single record in an input file is unusable.
    #[error("record error at line {line}: {message}")]
    Record { line: usize, message: String },

    /// Every field of a record was empty.
    #[error("record {paper_id} has no textual content")]
    EmptyDocument { paper_id: String },

    /// A prompt template is missing a required placeholder or section.
    #[error("template error: {0}")]
    Template(String),

    /// A caller violated an operation's contract.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// No YAML candidate list could be recovered from a completion.
    #[error("no parsable YAML list in completion output")]
    CandidateParse { raw: String },

    /// No usable YAML verdict could be recovered from a completion.
    #[error("verdict parse error: {message}")]
    VerdictParse { message: String, raw: String },

    /// Transport-level failure that persisted through retries.
    #[error("transport failure after {attempts} attempts: {message}")]
    Transient { attempts: u32, message: String },

    /// The provider answered, but not in the expected shape.
    #[error("provider error: {0}")]
    Provider(String),

    /// Offline mode was requested and the response cache had no entry.
    #[error("offline mode: cache miss for key {key}")]
    OfflineMiss { key: String },

    /// Evaluation pair ids do not line up.
    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    /// Attaches the offending path to an IO error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
