//! Bibliographic record ingestion and per-paper document assembly.
//!
//! Records arrive as CSV, TSV, or JSONL files carrying title, abstract,
//! author keywords, and publication year. Each record is concatenated into
//! a single whitespace-normalized text document that feeds the extraction
//! stages.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One publication's bibliographic fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiblioRecord {
    pub paper_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub keywords: Vec<String>,
    pub year: Option<i32>,
}

/// Assembled, whitespace-normalized input text for one paper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentText {
    pub paper_id: String,
    pub text: String,
}

/// Input serialization of a corpus file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Csv,
    Tsv,
    Jsonl,
}

impl CorpusFormat {
    /// Guess the format from a file extension.
    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "csv" => Some(CorpusFormat::Csv),
            "tsv" => Some(CorpusFormat::Tsv),
            "jsonl" | "ndjson" => Some(CorpusFormat::Jsonl),
            _ => None,
        }
    }
}

/// Collapse every whitespace run to a single space and trim the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

const VALID_YEARS: std::ops::RangeInclusive<i32> = 1900..=2100;

/// Parse bibliographic records from a byte stream.
///
/// Tabular formats need a header row with `title`, `abstract`, `keywords`,
/// and `year` columns (matched case-insensitively); `paper_id` is optional
/// and synthesized as `P<row>` when absent. Keywords are split on `;` and
/// trimmed. Missing abstracts or keywords become empty with a logged
/// warning.
pub fn parse_records(mut source: impl Read, format: CorpusFormat) -> Result<Vec<BiblioRecord>> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Format(format!("read failure: {e}")))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Encoding {
        offset: e.valid_up_to(),
    })?;

    let mut records = match format {
        CorpusFormat::Csv => parse_tabular(text, b','),
        CorpusFormat::Tsv => parse_tabular(text, b'\t'),
        CorpusFormat::Jsonl => parse_jsonl(text),
    }?;

    let mut seen = std::collections::HashSet::new();
    for (i, record) in records.iter_mut().enumerate() {
        let line = i + 1;
        if record.paper_id.is_empty() {
            record.paper_id = format!("P{line}");
        }
        if !seen.insert(record.paper_id.clone()) {
            return Err(Error::Record {
                line,
                message: format!("duplicate paper_id {:?}", record.paper_id),
            });
        }
        if record.title.trim().is_empty() {
            return Err(Error::Record {
                line,
                message: "empty title".into(),
            });
        }
        if let Some(year) = record.year {
            if !VALID_YEARS.contains(&year) {
                return Err(Error::Record {
                    line,
                    message: format!("year {year} outside {VALID_YEARS:?}"),
                });
            }
        }
        if record.abstract_text.is_empty() {
            log::warn!("record {} has an empty abstract", record.paper_id);
        }
        if record.keywords.is_empty() {
            log::warn!("record {} has no keywords", record.paper_id);
        }
    }
    Ok(records)
}

fn split_keywords(raw: &str) -> Vec<String> {
    raw.split(';')
        .map(str::trim)
        .filter(|k| !k.is_empty())
        .map(str::to_owned)
        .collect()
}

fn parse_year(raw: &str, line: usize) -> Result<Option<i32>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<i32>().map(Some).map_err(|_| Error::Record {
        line,
        message: format!("unparsable year {raw:?}"),
    })
}

fn parse_tabular(text: &str, delimiter: u8) -> Result<Vec<BiblioRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(false)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("unreadable header row: {e}")))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
    };
    let required = |name: &str| {
        column(name).ok_or_else(|| Error::Format(format!("missing column {name:?}")))
    };

    let title_col = required("title")?;
    let abstract_col = required("abstract")?;
    let keywords_col = required("keywords")?;
    let year_col = required("year")?;
    let id_col = column("paper_id");

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 1;
        let row = row.map_err(|e| Error::Record {
            line,
            message: e.to_string(),
        })?;
        let field = |col: usize| row.get(col).unwrap_or("").trim().to_owned();
        records.push(BiblioRecord {
            paper_id: id_col.map(field).unwrap_or_default(),
            title: field(title_col),
            abstract_text: field(abstract_col),
            keywords: split_keywords(&field(keywords_col)),
            year: parse_year(&field(year_col), line)?,
        });
    }
    Ok(records)
}

#[derive(Deserialize)]
struct JsonlRecord {
    #[serde(default)]
    paper_id: Option<String>,
    title: String,
    #[serde(rename = "abstract", default)]
    abstract_text: Option<String>,
    #[serde(default)]
    keywords: Option<Vec<String>>,
    #[serde(default)]
    year: Option<i32>,
}

fn parse_jsonl(text: &str) -> Result<Vec<BiblioRecord>> {
    let mut records = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let parsed: JsonlRecord =
            serde_json::from_str(raw_line).map_err(|e| Error::Record {
                line,
                message: e.to_string(),
            })?;
        records.push(BiblioRecord {
            paper_id: parsed.paper_id.unwrap_or_default(),
            title: parsed.title.trim().to_owned(),
            abstract_text: parsed.abstract_text.unwrap_or_default().trim().to_owned(),
            keywords: parsed
                .keywords
                .unwrap_or_default()
                .iter()
                .map(|k| k.trim().to_owned())
                .filter(|k| !k.is_empty())
                .collect(),
            year: parsed.year,
        });
    }
    Ok(records)
}

/// Serialize records back out in the given format.
///
/// The output reparses to an equal record list, which is the contract the
/// round-trip tests pin down.
pub fn write_records(records: &[BiblioRecord], format: CorpusFormat) -> Result<Vec<u8>> {
    match format {
        CorpusFormat::Csv => write_tabular(records, b','),
        CorpusFormat::Tsv => write_tabular(records, b'\t'),
        CorpusFormat::Jsonl => {
            let mut out = Vec::new();
            for record in records {
                serde_json::to_writer(&mut out, record)
                    .map_err(|e| Error::Format(e.to_string()))?;
                out.push(b'\n');
            }
            Ok(out)
        }
    }
}

fn write_tabular(records: &[BiblioRecord], delimiter: u8) -> Result<Vec<u8>> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(Vec::new());
    writer
        .write_record(["paper_id", "title", "abstract", "keywords", "year"])
        .map_err(|e| Error::Format(e.to_string()))?;
    for record in records {
        let year = record.year.map(|y| y.to_string()).unwrap_or_default();
        writer
            .write_record([
                record.paper_id.as_str(),
                record.title.as_str(),
                record.abstract_text.as_str(),
                &record.keywords.join("; "),
                &year,
            ])
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Format(e.to_string()))
}

/// Concatenate title, abstract, and keywords into one normalized document.
///
/// Empty fields are skipped, keywords join with `"; "`, and the result has
/// every whitespace run collapsed to a single space.
pub fn assemble_document(record: &BiblioRecord) -> Result<DocumentText> {
    let keyword_part = record.keywords.join("; ");
    let text = [
        record.title.as_str(),
        record.abstract_text.as_str(),
        keyword_part.as_str(),
    ]
    .iter()
    .map(|part| normalize_whitespace(part))
    .filter(|part| !part.is_empty())
    .collect::<Vec<_>>()
    .join(" ");

    if text.is_empty() {
        return Err(Error::EmptyDocument {
            paper_id: record.paper_id.clone(),
        });
    }
    Ok(DocumentText {
        paper_id: record.paper_id.clone(),
        text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(title: &str, abstract_text: &str, keywords: &[&str]) -> BiblioRecord {
        BiblioRecord {
            paper_id: "P1".into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
            keywords: keywords.iter().map(|k| k.to_string()).collect(),
            year: Some(2020),
        }
    }

    #[test]
    fn parses_single_csv_row() {
        let csv = "title,abstract,keywords,year\n\"T1\",\"A1\",\"vr; eeg\",2020\n";
        let records = parse_records(csv.as_bytes(), CorpusFormat::Csv).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].paper_id, "P1");
        assert_eq!(records[0].title, "T1");
        assert_eq!(records[0].abstract_text, "A1");
        assert_eq!(records[0].keywords, vec!["vr", "eeg"]);
        assert_eq!(records[0].year, Some(2020));
    }

    #[test]
    fn empty_abstract_parses_with_empty_field() {
        let csv = "title,abstract,keywords,year\nT1,,k1,2020\n";
        let records = parse_records(csv.as_bytes(), CorpusFormat::Csv).unwrap();
        assert_eq!(records[0].abstract_text, "");
    }

    #[test]
    fn full_corpus_row_count() {
        let mut csv = String::from("title,abstract,keywords,year\n");
        for i in 0..678 {
            csv.push_str(&format!("T{i},A{i},k{i},2020\n"));
        }
        let records = parse_records(csv.as_bytes(), CorpusFormat::Csv).unwrap();
        assert_eq!(records.len(), 678);
    }

    #[test]
    fn missing_column_is_named() {
        let csv = "title,abstract,year\nT1,A1,2020\n";
        let err = parse_records(csv.as_bytes(), CorpusFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Format(ref m) if m.contains("keywords")));
    }

    #[test]
    fn invalid_utf8_reports_offset() {
        let bytes = b"title,abstract,keywords,year\nT1,A\xff1,k,2020\n";
        let err = parse_records(&bytes[..], CorpusFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Encoding { offset: 33 }));
    }

    #[test]
    fn synthesizes_paper_ids_from_row_index() {
        let csv = "title,abstract,keywords,year\nT1,A,k,2020\nT2,A,k,2021\n";
        let records = parse_records(csv.as_bytes(), CorpusFormat::Csv).unwrap();
        assert_eq!(records[0].paper_id, "P1");
        assert_eq!(records[1].paper_id, "P2");
    }

    #[test]
    fn duplicate_paper_id_rejected() {
        let csv = "paper_id,title,abstract,keywords,year\nX,T1,A,k,2020\nX,T2,A,k,2020\n";
        let err = parse_records(csv.as_bytes(), CorpusFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Record { line: 2, .. }));
    }

    #[test]
    fn year_out_of_range_rejected() {
        let csv = "title,abstract,keywords,year\nT1,A,k,1850\n";
        assert!(parse_records(csv.as_bytes(), CorpusFormat::Csv).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let jsonl = concat!(
            "{\"paper_id\":\"a\",\"title\":\"T\",\"abstract\":\"A\",\"keywords\":[\"x\"],\"year\":2001}\n",
            "{\"title\":\"U\",\"abstract\":\"\",\"keywords\":[],\"year\":null}\n",
        );
        let records = parse_records(jsonl.as_bytes(), CorpusFormat::Jsonl).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[1].paper_id, "P2");
        let bytes = write_records(&records, CorpusFormat::Jsonl).unwrap();
        let again = parse_records(bytes.as_slice(), CorpusFormat::Jsonl).unwrap();
        assert_eq!(records, again);
    }

    #[test]
    fn assembles_title_abstract_keywords() {
        let doc = assemble_document(&record("T", "A", &["k1", "k2"])).unwrap();
        assert_eq!(doc.text, "T A k1; k2");
    }

    #[test]
    fn collapses_whitespace_runs() {
        let doc = assemble_document(&record("a  b\nc", "", &[])).unwrap();
        assert_eq!(doc.text, "a b c");
    }

    #[test]
    fn skips_empty_fields_without_double_separators() {
        let doc = assemble_document(&record("T", "", &[])).unwrap();
        assert_eq!(doc.text, "T");
    }

    #[test]
    fn all_empty_fields_error() {
        let rec = record("", "", &[]);
        assert!(matches!(
            assemble_document(&rec),
            Err(Error::EmptyDocument { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        // Field content without the structural delimiters the round trip
        // cannot preserve (";" splits keywords, whitespace is collapsed).
        fn field() -> impl Strategy<Value = String> {
            "[a-zA-Z0-9 .,()-]{0,40}"
        }

        fn keyword() -> impl Strategy<Value = String> {
            "[a-zA-Z0-9][a-zA-Z0-9 -]{0,15}[a-zA-Z0-9]"
        }

        fn arb_record(id: usize) -> impl Strategy<Value = BiblioRecord> {
            (
                "[a-zA-Z0-9][a-zA-Z0-9 ]{0,30}",
                field(),
                proptest::collection::vec(keyword(), 0..4),
                proptest::option::of(1900..2100i32),
            )
                .prop_map(move |(title, abstract_text, keywords, year)| BiblioRecord {
                    paper_id: format!("P{id}"),
                    title: normalize_whitespace(&title),
                    abstract_text: normalize_whitespace(&abstract_text),
                    keywords: keywords
                        .iter()
                        .map(|k| normalize_whitespace(k))
                        .filter(|k| !k.is_empty())
                        .collect(),
                    year,
                })
        }

        fn arb_records() -> impl Strategy<Value = Vec<BiblioRecord>> {
            proptest::collection::vec(proptest::num::usize::ANY, 1..6).prop_flat_map(|seeds| {
                seeds
                    .into_iter()
                    .enumerate()
                    .map(|(i, _)| arb_record(i + 1))
                    .collect::<Vec<_>>()
            })
        }

        proptest! {
            #[test]
            fn assemble_is_idempotent_under_renormalization(r in arb_record(1)) {
                prop_assume!(!r.title.is_empty());
                let doc = assemble_document(&r).unwrap();
                prop_assert_eq!(normalize_whitespace(&doc.text), doc.text);
            }

            #[test]
            fn assemble_preserves_field_characters_in_order(r in arb_record(1)) {
                prop_assume!(!r.title.is_empty());
                let doc = assemble_document(&r).unwrap();
                let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
                let mut expected = strip(&r.title);
                expected.push_str(&strip(&r.abstract_text));
                expected.push_str(&strip(&r.keywords.join(";")));
                prop_assert_eq!(strip(&doc.text), expected);
            }

            #[test]
            fn serialization_round_trips(records in arb_records(), fmt in 0..3usize) {
                let format = [CorpusFormat::Csv, CorpusFormat::Tsv, CorpusFormat::Jsonl][fmt];
                let bytes = write_records(&records, format).unwrap();
                let reparsed = parse_records(bytes.as_slice(), format).unwrap();
                prop_assert_eq!(records, reparsed);
            }
        }
    }
}
