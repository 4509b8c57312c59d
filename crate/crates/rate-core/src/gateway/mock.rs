//! Test backend: canned fixtures plus a deterministic simulator.
//!
//! Fixtures are exact-match (keyed by request digest or embedding text).
//! The simulator answers extraction and verdict prompts by scanning the
//! prompt's marked regions against a fixed gazetteer, and produces
//! embeddings from a hash-seeded generator, so end-to-end runs are fully
//! reproducible without any network access.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{CompletionBackend, CompletionRequest, EmbeddingBackend, EmbeddingVector};
use crate::error::{Error, Result};

/// Marker pair the simulator looks for to locate the paper text.
pub const DOCUMENT_OPEN: &str = "<<<DOCUMENT";
pub const DOCUMENT_CLOSE: &str = "DOCUMENT>>>";
/// Marker pair the simulator looks for to locate the term under review.
pub const CANDIDATE_OPEN: &str = "<<<CANDIDATE";
pub const CANDIDATE_CLOSE: &str = "CANDIDATE>>>";

pub const MOCK_EMBEDDING_DIM: usize = 64;

/// Phrases the simulator recognizes as technologies (all lowercase).
pub const GAZETTEER: &[&str] = &[
    "virtual reality",
    "augmented reality",
    "mixed reality",
    "machine learning",
    "deep learning",
    "eeg",
    "electroencephalography",
    "bci",
    "brain computer interface",
    "ssvep",
    "p300",
    "fmri",
    "fnirs",
    "emg",
    "convolutional neural network",
    "cnn",
    "recurrent neural network",
    "lstm",
    "support vector machine",
    "svm",
    "random forest",
    "transformer",
    "natural language processing",
    "nlp",
    "python",
    "matlab",
    "unity",
    "unreal engine",
    "oculus rift",
    "htc vive",
    "motion capture",
    "eye tracking",
    "haptic feedback",
    "signal processing",
    "independent component analysis",
    "ica",
    "wavelet transform",
    "kalman filter",
    "genetic algorithm",
    "reinforcement learning",
    "generative adversarial network",
    "gan",
    "blockchain",
    "cloud computing",
    "internet of things",
];

/// First eight bytes of the SHA-256 digest, big-endian.
pub fn stable_hash(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().unwrap())
}

fn lower_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn find_token_run(haystack: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || haystack.len() < needle.len() {
        return None;
    }
    (0..=haystack.len() - needle.len()).find(|&i| haystack[i..i + needle.len()] == *needle)
}

fn extract_between(text: &str, open: &str, close: &str) -> Option<String> {
    let start = text.find(open)? + open.len();
    let end = text[start..].find(close)? + start;
    Some(text[start..end].trim().to_owned())
}

#[derive(Serialize)]
struct SimCandidate {
    phrase: String,
    confidence: f64,
}

#[derive(Serialize)]
struct SimVerdict {
    is_technology: bool,
    reasoning: String,
    confidence: u8,
    technology_name: String,
}

/// In-memory backend. Thread-safe; cloneable via `Arc`.
#[derive(Default)]
pub struct MockBackend {
    completions: Mutex<HashMap<String, String>>,
    embeddings: Mutex<HashMap<String, Vec<f32>>>,
    simulate: bool,
    completion_count: AtomicUsize,
    embedding_count: AtomicUsize,
    fail_completions: AtomicUsize,
    completion_delay: Mutex<Duration>,
}

impl MockBackend {
    /// Fixture-only backend; unknown requests are provider errors.
    pub fn new() -> Self {
        MockBackend::default()
    }

    /// Fixture backend that falls back to the deterministic simulator.
    pub fn simulator() -> Self {
        MockBackend {
            simulate: true,
            ..MockBackend::default()
        }
    }

    pub fn add_completion_fixture(&self, request: &CompletionRequest, response: &str) {
        self.completions
            .lock()
            .unwrap()
            .insert(request.cache_key(), response.to_owned());
    }

    pub fn add_embedding_fixture(&self, text: &str, values: Vec<f32>) {
        self.embeddings
            .lock()
            .unwrap()
            .insert(text.to_owned(), values);
    }

    /// Make the next `n` completion calls fail with a transient error.
    pub fn fail_next_completions(&self, n: usize) {
        self.fail_completions.store(n, Ordering::SeqCst);
    }

    pub fn set_completion_delay(&self, delay: Duration) {
        *self.completion_delay.lock().unwrap() = delay;
    }

    pub fn completion_calls(&self) -> usize {
        self.completion_count.load(Ordering::SeqCst)
    }

    pub fn embedding_calls(&self) -> usize {
        self.embedding_count.load(Ordering::SeqCst)
    }

    fn simulate_extraction(&self, document: &str) -> String {
        let doc_tokens = lower_tokens(document);
        let mut hits: Vec<(usize, &str)> = GAZETTEER
            .iter()
            .filter_map(|phrase| {
                find_token_run(&doc_tokens, &lower_tokens(phrase)).map(|pos| (pos, *phrase))
            })
            .collect();
        hits.sort();

        let mut items = vec![SimCandidate {
            phrase: "advanced methodology".into(),
            confidence: 0.42,
        }];
        items.extend(hits.into_iter().map(|(_, phrase)| SimCandidate {
            phrase: phrase.to_owned(),
            confidence: 0.70 + (stable_hash(phrase) % 30) as f64 / 100.0,
        }));
        items.push(SimCandidate {
            phrase: "quantum flux capacitor".into(),
            confidence: 0.97,
        });
        items.push(SimCandidate {
            phrase: "novel integrated framework".into(),
            confidence: 0.82,
        });

        let yaml = serde_yaml::to_string(&items).unwrap();
        format!("Identified candidate technologies:\n\n```yaml\n{yaml}```\n")
    }

    fn simulate_verdict(&self, candidate: &str) -> String {
        let name = candidate.to_lowercase();
        let known = GAZETTEER.contains(&name.as_str());
        let verdict = if name == "python" {
            SimVerdict {
                is_technology: true,
                reasoning: "General-purpose language; borderline as a distinct technology here.".into(),
                confidence: 6,
                technology_name: name,
            }
        } else if known {
            SimVerdict {
                is_technology: true,
                reasoning: "Recognized applied technology with concrete implementations.".into(),
                confidence: 7 + (stable_hash(&name) % 3) as u8,
                technology_name: name,
            }
        } else {
            SimVerdict {
                is_technology: false,
                reasoning: "Generic or fictional phrase, not an applied technology.".into(),
                confidence: 8,
                technology_name: name,
            }
        };
        let yaml = serde_yaml::to_string(&verdict).unwrap();
        format!("```yaml\n{yaml}```\n")
    }

    fn simulate(&self, request: &CompletionRequest) -> Result<String> {
        let text = format!("{}\n{}", request.system_prompt, request.user_prompt);
        if let Some(candidate) = extract_between(&text, CANDIDATE_OPEN, CANDIDATE_CLOSE) {
            return Ok(self.simulate_verdict(&candidate));
        }
        if let Some(document) = extract_between(&text, DOCUMENT_OPEN, DOCUMENT_CLOSE) {
            return Ok(self.simulate_extraction(&document));
        }
        Err(Error::Provider(
            "mock simulator: prompt carries no document or candidate markers".into(),
        ))
    }

    fn simulated_embedding(text: &str) -> EmbeddingVector {
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(text));
        let mut values: Vec<f32> = (0..MOCK_EMBEDDING_DIM)
            .map(|_| rng.random_range(-1.0f32..1.0f32))
            .collect();
        let norm = values.iter().map(|v| f64::from(*v).powi(2)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v = (f64::from(*v) / norm) as f32;
            }
        }
        EmbeddingVector::new(values)
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        self.completion_count.fetch_add(1, Ordering::SeqCst);
        let delay = *self.completion_delay.lock().unwrap();
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
        if self
            .fail_completions
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
        {
            return Err(Error::Transient {
                attempts: 1,
                message: "injected mock failure".into(),
            });
        }
        if let Some(hit) = self.completions.lock().unwrap().get(&request.cache_key()) {
            return Ok(hit.clone());
        }
        if self.simulate {
            return self.simulate(request);
        }
        Err(Error::Provider("mock backend: no fixture for request".into()))
    }
}

impl EmbeddingBackend for MockBackend {
    fn embed(&self, _model: &str, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        self.embedding_count.fetch_add(1, Ordering::SeqCst);
        let fixtures = self.embeddings.lock().unwrap();
        texts
            .iter()
            .map(|text| {
                if let Some(values) = fixtures.get(text) {
                    Ok(EmbeddingVector::new(values.clone()))
                } else if self.simulate {
                    Ok(Self::simulated_embedding(text))
                } else {
                    Err(Error::Provider(format!(
                        "mock backend: no embedding fixture for {text:?}"
                    )))
                }
            })
            .collect()
    }
}
