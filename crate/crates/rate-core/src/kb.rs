//! Technology knowledge base: chunking, embedding, retrieval.
//!
//! Entries come from a JSONL catalog of known technologies. Each entry is
//! rendered to text, split into character chunks that snap to natural
//! boundaries, and embedded into a persistent vector index. Queries return
//! the top-scoring chunks by cosine similarity, optionally rebalanced so
//! the context covers distinct (type, domain) groups before depth.

use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{EmbeddingVector, Gateway};

pub const DEFAULT_CHUNK_SIZE: usize = 512;
pub const DEFAULT_CHUNK_OVERLAP: usize = 64;
pub const DEFAULT_RETRIEVE_K: usize = 20;
pub const DEFAULT_DIVERSITY_TARGET: usize = 7;

/// One catalog row. Unknown categories default rather than fail so sparse
/// catalogs still index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbEntry {
    pub name: String,
    #[serde(rename = "type", default = "unknown")]
    pub entry_type: String,
    #[serde(default = "unknown")]
    pub domain: String,
    #[serde(default)]
    pub description: String,
}

fn unknown() -> String {
    "unknown".into()
}

impl KbEntry {
    /// Text form fed to the embedder.
    pub fn render(&self) -> String {
        format!(
            "name: {}\ntype: {}\ndomain: {}\ndescription: {}",
            self.name, self.entry_type, self.domain, self.description
        )
    }
}

/// Read a JSONL catalog, one entry per non-empty line.
pub fn load_entries(path: impl AsRef<Path>) -> Result<Vec<KbEntry>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: KbEntry = serde_json::from_str(&line).map_err(|e| Error::Record {
            line: i + 1,
            message: format!("knowledge base entry: {e}"),
        })?;
        if entry.name.trim().is_empty() {
            return Err(Error::Record {
                line: i + 1,
                message: "knowledge base entry has an empty name".into(),
            });
        }
        entries.push(entry);
    }
    Ok(entries)
}

/// Character span of one chunk within its source text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub text: String,
    /// Char offset of the first character.
    pub start: usize,
    /// Char offset one past the last character.
    pub end: usize,
}

/// Split `text` into chunks of at most `chunk_size` characters where each
/// chunk starts exactly `overlap` characters before the previous one ended.
///
/// Chunk ends prefer, in order: a paragraph break, a sentence end, any
/// whitespace, and only then a hard cut. Offsets are exact, so skipping
/// `overlap` characters of every chunk after the first reconstructs the
/// input byte for byte.
pub fn chunk_text(text: &str, chunk_size: usize, overlap: usize) -> Result<Vec<Chunk>> {
    if chunk_size == 0 {
        return Err(Error::Precondition("chunk_size must be >= 1".into()));
    }
    if overlap >= chunk_size {
        return Err(Error::Precondition(format!(
            "overlap ({overlap}) must be smaller than chunk_size ({chunk_size})"
        )));
    }
    let chars: Vec<char> = text.chars().collect();
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        if chars.len() - start <= chunk_size {
            chunks.push(slice_chunk(&chars, start, chars.len()));
            break;
        }
        let hard_end = start + chunk_size;
        let floor = start + overlap; // exclusive: guarantees forward progress
        let end = pick_boundary(&chars, floor, hard_end);
        chunks.push(slice_chunk(&chars, start, end));
        start = end - overlap;
    }
    Ok(chunks)
}

fn slice_chunk(chars: &[char], start: usize, end: usize) -> Chunk {
    Chunk {
        text: chars[start..end].iter().collect(),
        start,
        end,
    }
}

/// Latest boundary position in `(floor, hard_end]`, preferring coarser
/// boundary kinds outright.
fn pick_boundary(chars: &[char], floor: usize, hard_end: usize) -> usize {
    let is_paragraph = |end: usize| end >= 2 && chars[end - 1] == '\n' && chars[end - 2] == '\n';
    let is_sentence = |end: usize| {
        chars[end - 1] == '\n'
            || (end >= 2
                && matches!(chars[end - 2], '.' | '!' | '?')
                && chars[end - 1].is_whitespace())
    };
    let is_space = |end: usize| chars[end - 1].is_whitespace();

    for check in [
        &is_paragraph as &dyn Fn(usize) -> bool,
        &is_sentence,
        &is_space,
    ] {
        if let Some(end) = (floor + 1..=hard_end).rev().find(|&e| check(e)) {
            return end;
        }
    }
    hard_end
}

/// A chunk plus the catalog metadata retrieval filters on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedChunk {
    pub text: String,
    pub entry_name: String,
    pub entry_type: String,
    pub domain: String,
    pub start: usize,
    pub end: usize,
}

/// One retrieval hit: chunk position in the index plus cosine score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Retrieved {
    pub index: usize,
    pub score: f64,
}

#[derive(Serialize, Deserialize)]
struct IndexMeta {
    model: String,
    dimension: usize,
    chunks: Vec<IndexedChunk>,
}

/// Embedded chunk store supporting cosine top-k retrieval.
pub struct VectorIndex {
    model: String,
    dimension: usize,
    chunks: Vec<IndexedChunk>,
    vectors: Vec<EmbeddingVector>,
}

const EMBED_BATCH: usize = 64;

impl VectorIndex {
    /// Chunk, embed, and index a catalog.
    pub fn build(
        entries: &[KbEntry],
        chunk_size: usize,
        overlap: usize,
        gateway: &Gateway,
    ) -> Result<VectorIndex> {
        let mut chunks = Vec::new();
        for entry in entries {
            for chunk in chunk_text(&entry.render(), chunk_size, overlap)? {
                chunks.push(IndexedChunk {
                    text: chunk.text,
                    entry_name: entry.name.clone(),
                    entry_type: entry.entry_type.clone(),
                    domain: entry.domain.clone(),
                    start: chunk.start,
                    end: chunk.end,
                });
            }
        }
        let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
        let mut vectors = Vec::with_capacity(texts.len());
        for batch in texts.chunks(EMBED_BATCH) {
            vectors.extend(gateway.embed(batch)?);
        }
        let dimension = vectors.first().map_or(0, EmbeddingVector::dimension);
        if vectors.iter().any(|v| v.dimension() != dimension) {
            return Err(Error::Provider("dimension mismatch across index batches".into()));
        }
        Ok(VectorIndex {
            model: gateway.config().embedding_model.clone(),
            dimension,
            chunks,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn chunk(&self, index: usize) -> &IndexedChunk {
        &self.chunks[index]
    }

    /// Top `k` chunks by cosine similarity, ties broken by index order.
    pub fn retrieve(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<Retrieved>> {
        if !self.is_empty() && query.dimension() != self.dimension {
            return Err(Error::Precondition(format!(
                "query dimension {} does not match index dimension {}",
                query.dimension(),
                self.dimension
            )));
        }
        let mut scored: Vec<Retrieved> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(index, v)| Retrieved {
                index,
                score: query.cosine(v),
            })
            .collect();
        scored.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap()
                .then(a.index.cmp(&b.index))
        });
        scored.truncate(k);
        Ok(scored)
    }

    /// Persist as a JSON metadata file plus packed little-endian f32 vectors.
    pub fn save(&self, meta_path: impl AsRef<Path>, vectors_path: impl AsRef<Path>) -> Result<()> {
        let meta_path = meta_path.as_ref();
        let vectors_path = vectors_path.as_ref();
        let meta = IndexMeta {
            model: self.model.clone(),
            dimension: self.dimension,
            chunks: self.chunks.clone(),
        };
        let json = serde_json::to_string_pretty(&meta)
            .map_err(|e| Error::Format(format!("serializing index metadata: {e}")))?;
        std::fs::write(meta_path, json).map_err(|e| Error::io(meta_path, e))?;
        let mut bytes = Vec::with_capacity(self.vectors.len() * self.dimension * 4);
        for vector in &self.vectors {
            for v in &vector.values {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::write(vectors_path, bytes).map_err(|e| Error::io(vectors_path, e))
    }

    /// Reload a saved index without re-embedding anything.
    pub fn load(meta_path: impl AsRef<Path>, vectors_path: impl AsRef<Path>) -> Result<VectorIndex> {
        let meta_path = meta_path.as_ref();
        let vectors_path = vectors_path.as_ref();
        let json = std::fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
        let meta: IndexMeta = serde_json::from_str(&json)
            .map_err(|e| Error::Format(format!("index metadata: {e}")))?;
        let bytes = std::fs::read(vectors_path).map_err(|e| Error::io(vectors_path, e))?;
        let expected = meta.chunks.len() * meta.dimension * 4;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "vector file holds {} bytes, metadata implies {expected}",
                bytes.len()
            )));
        }
        let floats: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let vectors = floats
            .chunks(meta.dimension.max(1))
            .take(meta.chunks.len())
            .map(|values| EmbeddingVector::new(values.to_vec()))
            .collect();
        Ok(VectorIndex {
            model: meta.model,
            dimension: meta.dimension,
            chunks: meta.chunks,
            vectors,
        })
    }
}

/// Rebalance ranked hits so distinct (type, domain) groups come first.
///
/// Pass one walks hits in rank order keeping the best hit of each unseen
/// group until `target` chunks are selected; pass two refills remaining
/// slots in rank order. Output preserves selection order and never exceeds
/// `target`.
pub fn diversity_filter(index: &VectorIndex, hits: &[Retrieved], target: usize) -> Vec<Retrieved> {
    let mut selected: Vec<Retrieved> = Vec::new();
    let mut taken = vec![false; hits.len()];
    let mut seen: HashSet<(String, String)> = HashSet::new();

    for (i, hit) in hits.iter().enumerate() {
        if selected.len() >= target {
            break;
        }
        let chunk = index.chunk(hit.index);
        let group = (chunk.entry_type.clone(), chunk.domain.clone());
        if seen.insert(group) {
            taken[i] = true;
            selected.push(*hit);
        }
    }
    for (i, hit) in hits.iter().enumerate() {
        if selected.len() >= target {
            break;
        }
        if !taken[i] {
            taken[i] = true;
            selected.push(*hit);
        }
    }
    selected
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::MockBackend;
    use crate::gateway::{Gateway, GatewayConfig};
    use proptest::prelude::*;

    fn simulator_gateway() -> Gateway {
        let backend = MockBackend::simulator();
        Gateway::new(
            GatewayConfig::default(),
            None,
            Some(Box::new(backend)),
            None,
        )
    }

    fn entry(name: &str, entry_type: &str, domain: &str) -> KbEntry {
        KbEntry {
            name: name.into(),
            entry_type: entry_type.into(),
            domain: domain.into(),
            description: format!("{name} is used in {domain}."),
        }
    }

    #[test]
    fn entry_render_shape() {
        let e = entry("EEG", "hardware", "neuroscience");
        assert_eq!(
            e.render(),
            "name: EEG\ntype: hardware\ndomain: neuroscience\ndescription: EEG is used in neuroscience."
        );
    }

    #[test]
    fn catalog_defaults_missing_categories() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.jsonl");
        std::fs::write(
            &path,
            "{\"name\": \"EEG\"}\n\n{\"name\": \"VR\", \"type\": \"platform\"}\n",
        )
        .unwrap();
        let entries = load_entries(&path).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].entry_type, "unknown");
        assert_eq!(entries[0].domain, "unknown");
        assert_eq!(entries[1].entry_type, "platform");
    }

    #[test]
    fn catalog_rejects_nameless_entries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.jsonl");
        std::fs::write(&path, "{\"name\": \"  \"}\n").unwrap();
        assert!(matches!(
            load_entries(&path),
            Err(Error::Record { line: 1, .. })
        ));
    }

    #[test]
    fn chunker_prefers_paragraph_breaks() {
        let text = "First paragraph here.\n\nSecond paragraph starts and keeps going for a while.";
        let chunks = chunk_text(text, 40, 5).unwrap();
        // The first chunk should end exactly at the paragraph break, not at
        // the 40-char hard limit.
        assert!(chunks[0].text.ends_with("here.\n\n"));
    }

    #[test]
    fn chunker_falls_back_to_sentences_then_spaces() {
        let text = "One sentence ends. Another one continues without paragraph breaks at all.";
        let chunks = chunk_text(text, 30, 4).unwrap();
        assert!(chunks[0].text.ends_with(". "));

        let unbroken = "words only here no punctuation to speak of just spaces";
        let chunks = chunk_text(unbroken, 20, 4).unwrap();
        assert!(chunks[0].text.ends_with(' '));
    }

    #[test]
    fn chunker_hard_cuts_unbreakable_runs() {
        let text = "x".repeat(25);
        let chunks = chunk_text(&text, 10, 2).unwrap();
        assert_eq!(chunks[0].text.len(), 10);
        assert_eq!(chunks[0].end, 10);
        assert_eq!(chunks[1].start, 8);
    }

    #[test]
    fn chunker_rejects_bad_parameters() {
        assert!(chunk_text("abc", 0, 0).is_err());
        assert!(chunk_text("abc", 4, 4).is_err());
        assert!(chunk_text("abc", 4, 9).is_err());
    }

    #[test]
    fn short_text_is_a_single_chunk() {
        let chunks = chunk_text("tiny", 512, 64).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].text, "tiny");
        assert!(chunk_text("", 512, 64).unwrap().is_empty());
    }

    fn reassemble(chunks: &[Chunk], overlap: usize) -> String {
        let mut out = String::new();
        for (i, chunk) in chunks.iter().enumerate() {
            let skip = if i == 0 { 0 } else { overlap };
            out.extend(chunk.text.chars().skip(skip));
        }
        out
    }

    proptest! {
        #[test]
        fn chunks_reassemble_to_the_original_text(
            text in "[a-zA-Z .!?\n]{0,400}",
            chunk_size in 8usize..64,
            overlap in 0usize..7,
        ) {
            let chunks = chunk_text(&text, chunk_size, overlap).unwrap();
            prop_assert_eq!(reassemble(&chunks, overlap), text.clone());
            let n_chars = text.chars().count();
            for (i, c) in chunks.iter().enumerate() {
                prop_assert!(c.end - c.start <= chunk_size);
                prop_assert!(c.end > c.start);
                if i > 0 {
                    prop_assert_eq!(c.start, chunks[i - 1].end - overlap);
                }
            }
            if !text.is_empty() {
                prop_assert_eq!(chunks[0].start, 0);
                prop_assert_eq!(chunks.last().unwrap().end, n_chars);
            }
        }
    }

    #[test]
    fn retrieval_ranks_identical_text_first() {
        let entries = vec![
            entry("electroencephalography", "method", "neuroscience"),
            entry("virtual reality", "platform", "graphics"),
            entry("blockchain", "infrastructure", "distributed systems"),
        ];
        let gateway = simulator_gateway();
        let index = VectorIndex::build(&entries, 512, 64, &gateway).unwrap();
        assert_eq!(index.len(), 3);

        let query = gateway.embed_one(&entries[1].render()).unwrap();
        let hits = index.retrieve(&query, 2).unwrap();
        assert_eq!(index.chunk(hits[0].index).entry_name, "virtual reality");
        assert!((hits[0].score - 1.0).abs() < 1e-9);
        assert!(hits[0].score >= hits[1].score);
    }

    #[test]
    fn retrieval_truncates_to_index_size_and_breaks_ties_by_insertion() {
        let gateway = simulator_gateway();
        let entries = vec![entry("a", "t", "d")];
        let index = VectorIndex::build(&entries, 512, 64, &gateway).unwrap();
        let query = gateway.embed_one("anything").unwrap();
        assert_eq!(index.retrieve(&query, 20).unwrap().len(), 1);

        // Duplicate entries embed identically: equal scores, index order.
        let entries = vec![entry("a", "t", "d"), entry("a", "t", "d")];
        let index = VectorIndex::build(&entries, 512, 64, &gateway).unwrap();
        let hits = index.retrieve(&query, 2).unwrap();
        assert_eq!((hits[0].index, hits[1].index), (0, 1));
        assert_eq!(hits[0].score, hits[1].score);
    }

    #[test]
    fn saved_index_reloads_without_reembedding() {
        let gateway = simulator_gateway();
        let entries = vec![
            entry("eeg", "method", "neuroscience"),
            entry("unity", "engine", "graphics"),
        ];
        let index = VectorIndex::build(&entries, 64, 8, &gateway).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let meta = dir.path().join("index.json");
        let vectors = dir.path().join("vectors.f32");
        index.save(&meta, &vectors).unwrap();

        let reloaded = VectorIndex::load(&meta, &vectors).unwrap();
        assert_eq!(reloaded.len(), index.len());
        let query = gateway.embed_one("eeg electrodes").unwrap();
        let a = index.retrieve(&query, 3).unwrap();
        let b = reloaded.retrieve(&query, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn load_rejects_truncated_vector_files() {
        let gateway = simulator_gateway();
        let index = VectorIndex::build(&[entry("a", "t", "d")], 64, 8, &gateway).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let meta = dir.path().join("index.json");
        let vectors = dir.path().join("vectors.f32");
        index.save(&meta, &vectors).unwrap();
        let bytes = std::fs::read(&vectors).unwrap();
        std::fs::write(&vectors, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(
            VectorIndex::load(&meta, &vectors),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn mismatched_query_dimension_is_rejected() {
        let gateway = simulator_gateway();
        let index = VectorIndex::build(&[entry("a", "t", "d")], 64, 8, &gateway).unwrap();
        let query = EmbeddingVector::new(vec![1.0, 0.0]);
        assert!(matches!(
            index.retrieve(&query, 1),
            Err(Error::Precondition(_))
        ));
    }

    fn diversity_index(groups: &[(&str, &str)]) -> VectorIndex {
        let gateway = simulator_gateway();
        let entries: Vec<KbEntry> = groups
            .iter()
            .enumerate()
            .map(|(i, (t, d))| entry(&format!("entry{i}"), t, d))
            .collect();
        VectorIndex::build(&entries, 512, 64, &gateway).unwrap()
    }

    fn ranked(n: usize) -> Vec<Retrieved> {
        (0..n)
            .map(|index| Retrieved {
                index,
                score: 1.0 - index as f64 * 0.01,
            })
            .collect()
    }

    #[test]
    fn diversity_prefers_unseen_groups_then_refills_by_rank() {
        let index = diversity_index(&[
            ("method", "neuro"),
            ("method", "neuro"),
            ("platform", "graphics"),
            ("method", "neuro"),
            ("infrastructure", "web"),
        ]);
        let hits = ranked(5);
        let picked = diversity_filter(&index, &hits, 4);
        let order: Vec<usize> = picked.iter().map(|h| h.index).collect();
        // Groups first (0, 2, 4), then refill with the best remaining (1).
        assert_eq!(order, vec![0, 2, 4, 1]);
    }

    #[test]
    fn diversity_never_exceeds_target_or_input() {
        let index = diversity_index(&[("a", "x"), ("b", "y"), ("c", "z")]);
        let hits = ranked(3);
        assert_eq!(diversity_filter(&index, &hits, 2).len(), 2);
        assert_eq!(diversity_filter(&index, &hits, 9).len(), 3);
        assert!(diversity_filter(&index, &[], 7).is_empty());
    }

    proptest! {
        #[test]
        fn diversity_filter_matches_two_pass_brute_force(
            group_ids in proptest::collection::vec((0u8..4, 0u8..4), 0..12),
            target in 0usize..10,
        ) {
            let names: Vec<(String, String)> = group_ids
                .iter()
                .map(|(t, d)| (format!("t{t}"), format!("d{d}")))
                .collect();
            let groups: Vec<(&str, &str)> = names
                .iter()
                .map(|(t, d)| (t.as_str(), d.as_str()))
                .collect();
            let index = diversity_index(&groups);
            let hits = ranked(groups.len());

            // Independent brute force: pass one keeps first hit per group,
            // pass two refills in rank order.
            let mut expected: Vec<Retrieved> = Vec::new();
            let mut used = vec![false; hits.len()];
            let mut seen: Vec<(String, String)> = Vec::new();
            for (i, h) in hits.iter().enumerate() {
                if expected.len() >= target { break; }
                let c = index.chunk(h.index);
                let g = (c.entry_type.clone(), c.domain.clone());
                if !seen.contains(&g) {
                    seen.push(g);
                    used[i] = true;
                    expected.push(*h);
                }
            }
            for (i, h) in hits.iter().enumerate() {
                if expected.len() >= target { break; }
                if !used[i] {
                    expected.push(*h);
                }
            }

            prop_assert_eq!(diversity_filter(&index, &hits, target), expected);
        }
    }
}
