//! Pipeline stages and their orchestration.
//!
//! Each stage reads the artifacts of earlier stages from the output
//! directory and writes its own. Stages that call the model gateway
//! (build-kb, extract, ground, validate) resume per paper: rows already
//! present in the stage artifact are kept unless `--force` is given, and
//! the artifact is rewritten in corpus order either way.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use rate_core::corpus::{self, CorpusFormat, DocumentText};
use rate_core::definitional::{self, DefinitionSet};
use rate_core::extract;
use rate_core::gateway::http::HttpBackend;
use rate_core::gateway::mock::MockBackend;
use rate_core::gateway::{EmbeddingVector, Gateway, GatewayConfig, ResponseCache};
use rate_core::heuristic::{self, GroundingDecision};
use rate_core::kb::{self, VectorIndex};
use rate_core::postprocess;
use rate_core::prompt::PromptTemplate;
use rate_core::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::{
    self, CandidateRow, FinalRow, GroundedCandidate, GroundedRow, ValidatedRow,
};
use crate::config::{Config, ProviderKind};

pub const KB_VECTORS: &str = "kb_vectors.f32";

/// Failure categories, each with a distinct process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid or insufficient configuration (exit 2).
    Config(Vec<String>),
    /// A required input or upstream artifact is missing (exit 3).
    Prerequisite(String),
    /// The model provider failed or the offline cache missed (exit 4).
    Provider(String),
    /// Anything else: IO, malformed data, internal errors (exit 1).
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Prerequisite(_) => 3,
            CliError::Provider(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(issues) => {
                writeln!(f, "configuration error:")?;
                for issue in issues {
                    writeln!(f, "  - {issue}")?;
                }
                Ok(())
            }
            CliError::Prerequisite(msg) => write!(f, "missing prerequisite: {msg}"),
            CliError::Provider(msg) => write!(f, "provider failure: {msg}"),
            CliError::Other(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match &e {
            Error::Transient { .. } | Error::Provider(_) | Error::OfflineMiss { .. } => {
                CliError::Provider(e.to_string())
            }
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<rate_graph::GraphError> for CliError {
    fn from(e: rate_graph::GraphError) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

/// Summary statistics written next to the network exports.
#[derive(Debug, Serialize)]
struct NetworkReport {
    min_weighted_degree: u64,
    initial_node_count: usize,
    initial_edge_count: usize,
    #[serde(flatten)]
    stats: rate_graph::NetworkStats,
    louvain_seed: u64,
    louvain_modularity: f64,
    louvain_communities: usize,
    girvan_newman_modularity: Option<f64>,
    girvan_newman_communities: Option<usize>,
}

pub struct Pipeline {
    config: Config,
    force: bool,
    offline: bool,
    limit: Option<usize>,
    seed_override: Option<u64>,
    gateway: OnceLock<Gateway>,
}

impl Pipeline {
    pub fn new(
        config: Config,
        force: bool,
        offline: bool,
        limit: Option<usize>,
        seed_override: Option<u64>,
    ) -> Self {
        Pipeline {
            config,
            force,
            offline,
            limit,
            seed_override,
            gateway: OnceLock::new(),
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn require_setting<'a, T>(&self, value: &'a Option<T>, key: &str, stage: &str) -> Result<&'a T, CliError> {
        value
            .as_ref()
            .ok_or_else(|| CliError::Config(vec![format!("{key} must be set to run {stage}")]))
    }

    fn require_file(&self, path: &Path, what: &str) -> Result<(), CliError> {
        if path.is_file() {
            Ok(())
        } else {
            Err(CliError::Prerequisite(format!(
                "{what} not found at {}",
                path.display()
            )))
        }
    }

    fn up_to_date(&self, stage: &str, outputs: &[&Path]) -> bool {
        if self.force {
            return false;
        }
        if outputs.iter().all(|p| p.exists()) {
            log::info!("{stage}: outputs already present, skipping (use --force to redo)");
            true
        } else {
            false
        }
    }

    fn gateway(&self) -> Result<&Gateway, CliError> {
        if self.gateway.get().is_none() {
            let built = self.build_gateway()?;
            let _ = self.gateway.set(built);
        }
        Ok(self.gateway.get().expect("gateway just initialized"))
    }

    fn build_gateway(&self) -> Result<Gateway, CliError> {
        let provider = &self.config.provider;
        let gw_config = GatewayConfig {
            completion_model: provider.completion_model.clone(),
            embedding_model: provider.embedding_model.clone(),
            offline: self.offline,
            max_concurrency: provider.max_concurrency,
            retry_attempts: provider.retry_attempts,
            ..GatewayConfig::default()
        };
        let cache = ResponseCache::open(&self.config.cache_dir)?;
        if self.offline {
            return Ok(Gateway::offline(gw_config, cache));
        }
        match provider.kind {
            ProviderKind::Mock => {
                let backend = Arc::new(MockBackend::simulator());
                Ok(Gateway::new(
                    gw_config,
                    Some(Box::new(backend.clone())),
                    Some(Box::new(backend)),
                    Some(cache),
                ))
            }
            ProviderKind::Http => {
                let base_url = provider
                    .base_url
                    .clone()
                    .expect("validated when the config was loaded");
                let api_key = std::env::var("RATE_API_KEY").ok();
                if api_key.is_none() {
                    log::warn!("RATE_API_KEY is not set; sending unauthenticated requests");
                }
                let backend = Arc::new(HttpBackend::new(base_url, api_key)?);
                Ok(Gateway::new(
                    gw_config,
                    Some(Box::new(backend.clone())),
                    Some(Box::new(backend)),
                    Some(cache),
                ))
            }
        }
    }

    fn load_documents(&self) -> Result<Vec<DocumentText>, CliError> {
        let path = self.out(artifacts::DOCUMENTS);
        self.require_file(&path, "document artifact (run `rate ingest` first)")?;
        Ok(artifacts::read_jsonl(&path)?)
    }

    fn load_index(&self) -> Result<VectorIndex, CliError> {
        let meta = self.out(artifacts::KB_INDEX);
        let vectors = self.out(KB_VECTORS);
        self.require_file(&meta, "knowledge-base index (run `rate build-kb` first)")?;
        self.require_file(&vectors, "knowledge-base vectors (run `rate build-kb` first)")?;
        Ok(VectorIndex::load(&meta, &vectors)?)
    }

    /// Merges freshly computed rows with reusable ones and writes the
    /// artifact in corpus order.
    fn write_in_order<T: Serialize>(
        &self,
        path: &Path,
        documents: &[DocumentText],
        mut rows: std::collections::BTreeMap<String, T>,
    ) -> Result<(), CliError> {
        let ordered: Vec<T> = documents
            .iter()
            .filter_map(|d| rows.remove(&d.paper_id))
            .collect();
        artifacts::write_jsonl(path, &ordered)?;
        Ok(())
    }

    pub fn ingest(&self) -> Result<(), CliError> {
        let input = self.require_setting(&self.config.corpus_input, "corpus.input", "ingest")?;
        self.require_file(input, "corpus input")?;
        let out = self.out(artifacts::DOCUMENTS);
        if self.up_to_date("ingest", &[&out]) {
            return Ok(());
        }
        let ext = input
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or_default();
        let format = CorpusFormat::from_extension(ext).ok_or_else(|| {
            CliError::Config(vec![format!(
                "corpus.input has unsupported extension {ext:?} (expected csv, tsv, or jsonl)"
            )])
        })?;
        let file = std::fs::File::open(input).map_err(|e| Error::io(input, e))?;
        let mut records = corpus::parse_records(std::io::BufReader::new(file), format)?;
        if let Some(limit) = self.limit {
            records.truncate(limit);
        }
        let documents = records
            .iter()
            .map(corpus::assemble_document)
            .collect::<rate_core::Result<Vec<_>>>()?;
        artifacts::write_jsonl(&out, &documents)?;
        log::info!("ingest: wrote {} documents", documents.len());
        Ok(())
    }

    pub fn build_kb(&self) -> Result<(), CliError> {
        let catalog = self.require_setting(&self.config.kb.catalog, "kb.catalog", "build-kb")?;
        self.require_file(catalog, "knowledge-base catalog")?;
        let meta = self.out(artifacts::KB_INDEX);
        let vectors = self.out(KB_VECTORS);
        if self.up_to_date("build-kb", &[&meta, &vectors]) {
            return Ok(());
        }
        let entries = kb::load_entries(catalog)?;
        let index = VectorIndex::build(
            &entries,
            self.config.kb.chunk_size,
            self.config.kb.chunk_overlap,
            self.gateway()?,
        )?;
        index.save(&meta, &vectors)?;
        log::info!(
            "build-kb: indexed {} chunks from {} entries",
            index.len(),
            entries.len()
        );
        Ok(())
    }

    pub fn extract(&self) -> Result<(), CliError> {
        let template_path = self.require_setting(
            &self.config.extraction_template,
            "extraction.template",
            "extract",
        )?;
        self.require_file(template_path, "extraction prompt template")?;
        let template = PromptTemplate::load(template_path)?;
        let documents = self.load_documents()?;
        let index = self.load_index()?;
        let out = self.out(artifacts::CANDIDATES);

        let mut rows = if self.force {
            Default::default()
        } else {
            artifacts::load_keyed::<CandidateRow, _>(&out, |r| r.paper_id.clone())?
        };
        let pending: Vec<&DocumentText> = documents
            .iter()
            .filter(|d| !rows.contains_key(&d.paper_id))
            .collect();
        log::info!(
            "extract: {} papers to process, {} reused",
            pending.len(),
            documents.len() - pending.len()
        );

        let gateway = self.gateway()?;
        let threshold = self.config.confidence_threshold;
        let retrieve_k = self.config.kb.retrieve_k;
        let diversity_target = self.config.kb.diversity_target;
        let fresh: Vec<CandidateRow> = pending
            .par_iter()
            .map(|doc| -> Result<CandidateRow, CliError> {
                let query = gateway.embed_one(&doc.text)?;
                let hits = index.retrieve(&query, retrieve_k)?;
                let hits = kb::diversity_filter(&index, &hits, diversity_target);
                let context: Vec<String> = hits
                    .iter()
                    .map(|h| index.chunk(h.index).text.clone())
                    .collect();
                let candidates =
                    extract::extract_candidates(gateway, &template, &doc.text, &context, threshold)?;
                Ok(CandidateRow {
                    paper_id: doc.paper_id.clone(),
                    candidates,
                })
            })
            .collect::<Result<_, _>>()?;
        for row in fresh {
            rows.insert(row.paper_id.clone(), row);
        }
        self.write_in_order(&out, &documents, rows)
    }

    pub fn ground(&self) -> Result<(), CliError> {
        let documents = self.load_documents()?;
        let candidates_path = self.out(artifacts::CANDIDATES);
        self.require_file(&candidates_path, "candidate artifact (run `rate extract` first)")?;
        let candidate_rows: Vec<CandidateRow> = artifacts::read_jsonl(&candidates_path)?;
        let by_id: std::collections::BTreeMap<&str, &CandidateRow> = candidate_rows
            .iter()
            .map(|r| (r.paper_id.as_str(), r))
            .collect();
        let out = self.out(artifacts::GROUNDED);

        let mut rows = if self.force {
            Default::default()
        } else {
            artifacts::load_keyed::<GroundedRow, _>(&out, |r| r.paper_id.clone())?
        };
        let pending: Vec<&DocumentText> = documents
            .iter()
            .filter(|d| !rows.contains_key(&d.paper_id) && by_id.contains_key(d.paper_id.as_str()))
            .collect();
        log::info!("ground: {} papers to process", pending.len());

        let gateway = self.gateway()?;
        let thresholds = &self.config.grounding;
        let fresh: Vec<GroundedRow> = pending
            .par_iter()
            .map(|doc| -> Result<GroundedRow, CliError> {
                let row = by_id[doc.paper_id.as_str()];
                // The document embedding is shared by every candidate of the
                // paper, but only computed if the semantic fallback fires.
                let mut doc_vector: Option<EmbeddingVector> = None;
                let mut grounded = Vec::with_capacity(row.candidates.len());
                for candidate in &row.candidates {
                    let decision: GroundingDecision = heuristic::heuristic_validate(
                        &candidate.phrase,
                        candidate.confidence,
                        &doc.text,
                        thresholds,
                        |phrase, document| {
                            if doc_vector.is_none() {
                                doc_vector = Some(gateway.embed_one(document)?);
                            }
                            let phrase_vector = gateway.embed_one(phrase)?;
                            Ok(doc_vector
                                .as_ref()
                                .expect("document vector just computed")
                                .cosine(&phrase_vector))
                        },
                    )?;
                    grounded.push(GroundedCandidate {
                        phrase: candidate.phrase.clone(),
                        confidence: candidate.confidence,
                        decision,
                    });
                }
                Ok(GroundedRow {
                    paper_id: doc.paper_id.clone(),
                    candidates: grounded,
                })
            })
            .collect::<Result<_, _>>()?;
        for row in fresh {
            rows.insert(row.paper_id.clone(), row);
        }
        self.write_in_order(&out, &documents, rows)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let template_path = self.require_setting(
            &self.config.validation_template,
            "validation.template",
            "validate",
        )?;
        self.require_file(template_path, "validation prompt template")?;
        let definitions_path = self.require_setting(
            &self.config.definitions,
            "validation.definitions",
            "validate",
        )?;
        self.require_file(definitions_path, "technology definition file")?;
        let template = PromptTemplate::load(template_path)?;
        let definitions = DefinitionSet::load(definitions_path)?;

        let documents = self.load_documents()?;
        let grounded_path = self.out(artifacts::GROUNDED);
        self.require_file(&grounded_path, "grounded artifact (run `rate ground` first)")?;
        let grounded_rows: Vec<GroundedRow> = artifacts::read_jsonl(&grounded_path)?;
        let by_id: std::collections::BTreeMap<&str, &GroundedRow> = grounded_rows
            .iter()
            .map(|r| (r.paper_id.as_str(), r))
            .collect();
        let out = self.out(artifacts::VALIDATED);

        let mut rows = if self.force {
            Default::default()
        } else {
            artifacts::load_keyed::<ValidatedRow, _>(&out, |r| r.paper_id.clone())?
        };
        let pending: Vec<&DocumentText> = documents
            .iter()
            .filter(|d| !rows.contains_key(&d.paper_id) && by_id.contains_key(d.paper_id.as_str()))
            .collect();
        log::info!("validate: {} papers to process", pending.len());

        let gateway = self.gateway()?;
        let fresh: Vec<ValidatedRow> = pending
            .par_iter()
            .map(|doc| -> Result<ValidatedRow, CliError> {
                let row = by_id[doc.paper_id.as_str()];
                let survivors: Vec<String> = row
                    .candidates
                    .iter()
                    .filter(|c| c.decision.accepted())
                    .map(|c| c.phrase.clone())
                    .collect();
                let report = definitional::definitional_validate(
                    gateway,
                    &template,
                    &survivors,
                    &doc.text,
                    &definitions,
                )?;
                Ok(ValidatedRow {
                    paper_id: doc.paper_id.clone(),
                    kept: report.kept,
                    records: report.records,
                })
            })
            .collect::<Result<_, _>>()?;
        for row in fresh {
            rows.insert(row.paper_id.clone(), row);
        }
        self.write_in_order(&out, &documents, rows)
    }

    pub fn finalize(&self) -> Result<(), CliError> {
        let validated_path = self.out(artifacts::VALIDATED);
        self.require_file(&validated_path, "validated artifact (run `rate validate` first)")?;
        let validated: Vec<ValidatedRow> = artifacts::read_jsonl(&validated_path)?;

        let blocklist = match &self.config.blocklist {
            Some(path) => {
                self.require_file(path, "blocklist")?;
                postprocess::load_blocklist(path)?
            }
            None => Default::default(),
        };

        let rows: Vec<FinalRow> = validated
            .iter()
            .map(|row| FinalRow {
                paper_id: row.paper_id.clone(),
                terms: postprocess::finalize(&row.kept, &blocklist),
            })
            .collect();
        artifacts::write_jsonl(&self.out(artifacts::FINAL_TERMS), &rows)?;

        let mut csv_writer = csv::Writer::from_writer(Vec::new());
        csv_writer
            .write_record(["paper_id", "term"])
            .map_err(|e| CliError::Other(e.to_string()))?;
        for row in &rows {
            for term in &row.terms {
                csv_writer
                    .write_record([row.paper_id.as_str(), term.as_str()])
                    .map_err(|e| CliError::Other(e.to_string()))?;
            }
        }
        let bytes = csv_writer
            .into_inner()
            .map_err(|e| CliError::Other(e.to_string()))?;
        artifacts::write_atomic(&self.out(artifacts::FINAL_CSV), &bytes)?;
        log::info!("finalize: wrote final term lists for {} papers", rows.len());
        Ok(())
    }

    pub fn evaluate(&self) -> Result<(), CliError> {
        let gold_path = self.require_setting(&self.config.gold, "corpus.gold", "evaluate")?;
        self.require_file(gold_path, "gold standard")?;
        let final_path = self.out(artifacts::FINAL_TERMS);
        self.require_file(&final_path, "final term artifact (run `rate finalize` first)")?;

        let predicted: Vec<FinalRow> = artifacts::read_jsonl(&final_path)?;
        let gold: Vec<FinalRow> = artifacts::read_jsonl(gold_path)?;
        let to_pairs = |rows: Vec<FinalRow>| -> Vec<(String, Vec<String>)> {
            rows.into_iter().map(|r| (r.paper_id, r.terms)).collect()
        };
        let eval = rate_core::evaluation::evaluate_corpus(&to_pairs(predicted), &to_pairs(gold))?;
        artifacts::write_json_pretty(&self.out(artifacts::EVALUATION), &eval)?;
        match (eval.metrics.precision, eval.metrics.recall, eval.metrics.f1) {
            (Some(p), Some(r), Some(f1)) => log::info!(
                "evaluate: precision {:.2}%, recall {:.2}%, F1 {:.2}%",
                p * 100.0,
                r * 100.0,
                f1 * 100.0
            ),
            _ => log::warn!("evaluate: metrics undefined (empty predictions or gold)"),
        }
        Ok(())
    }

    pub fn network(&self) -> Result<(), CliError> {
        let final_path = self.out(artifacts::FINAL_TERMS);
        self.require_file(&final_path, "final term artifact (run `rate finalize` first)")?;
        let rows: Vec<FinalRow> = artifacts::read_jsonl(&final_path)?;
        let term_lists: Vec<Vec<String>> = rows.into_iter().map(|r| r.terms).collect();

        let full = rate_graph::build_network(&term_lists);
        let min = self.config.network.min_weighted_degree;
        let filtered = full.filter_by_weighted_degree(min);
        let stats = rate_graph::compute_stats(&filtered);

        let seed = self.seed_override.unwrap_or(self.config.network.louvain_seed);
        let louvain = rate_graph::louvain(&filtered, seed)?;
        let gn = if filtered.edge_count() <= self.config.network.girvan_newman_max_edges {
            Some(rate_graph::girvan_newman(&filtered)?)
        } else {
            log::warn!(
                "network: {} edges exceed network.girvan_newman_max_edges ({}), skipping divisive detection",
                filtered.edge_count(),
                self.config.network.girvan_newman_max_edges
            );
            None
        };

        let report = NetworkReport {
            min_weighted_degree: min,
            initial_node_count: full.node_count(),
            initial_edge_count: full.edge_count(),
            stats,
            louvain_seed: seed,
            louvain_modularity: louvain.modularity,
            louvain_communities: louvain.community_count,
            girvan_newman_modularity: gn.as_ref().map(|r| r.modularity),
            girvan_newman_communities: gn.as_ref().map(|r| r.community_count),
        };

        let gexf = rate_graph::to_gexf(&filtered, Some(&louvain.assignment));
        let graphml = rate_graph::to_graphml(&filtered, Some(&louvain.assignment));
        let csv_text = rate_graph::to_csv(&filtered);
        artifacts::write_atomic(&self.out(artifacts::NETWORK_GEXF), gexf.as_bytes())?;
        artifacts::write_atomic(&self.out(artifacts::NETWORK_GRAPHML), graphml.as_bytes())?;
        artifacts::write_atomic(&self.out(artifacts::NETWORK_CSV), csv_text.as_bytes())?;
        artifacts::write_json_pretty(&self.out(artifacts::NETWORK_STATS), &report)?;
        log::info!(
            "network: {} nodes, {} edges after filtering (from {} / {}); louvain Q = {:.4}",
            filtered.node_count(),
            filtered.edge_count(),
            full.node_count(),
            full.edge_count(),
            louvain.modularity
        );
        Ok(())
    }

    pub fn all(&self) -> Result<(), CliError> {
        self.ingest()?;
        self.build_kb()?;
        self.extract()?;
        self.ground()?;
        self.validate()?;
        self.finalize()?;
        if self.config.gold.is_some() {
            self.evaluate()?;
        } else {
            log::info!("all: corpus.gold not configured, skipping evaluation");
        }
        self.network()
    }
}
