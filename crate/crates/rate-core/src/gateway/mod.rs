//! Uniform access to chat-completion and embedding endpoints.
//!
//! Every call is keyed by a content digest and cached on disk, so a warmed
//! cache replays byte-identically without touching the network. Backends
//! are pluggable: [`http::HttpBackend`] speaks the common chat-completions
//! and embeddings HTTP shapes, [`mock::MockBackend`] serves fixtures and a
//! deterministic simulator for tests and offline runs.

pub mod http;
pub mod mock;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One chat-completion call with deterministic generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_TOKENS: u32 = 4096;

impl CompletionRequest {
    pub fn new(
        model: impl Into<String>,
        system_prompt: impl Into<String>,
        user_prompt: impl Into<String>,
    ) -> Self {
        CompletionRequest {
            model: model.into(),
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.system_prompt.is_empty() || self.user_prompt.is_empty() {
            return Err(Error::Precondition("completion prompts must be non-empty".into()));
        }
        if self.temperature < 0.0 {
            return Err(Error::Precondition("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(Error::Precondition("max_tokens must be >= 1".into()));
        }
        Ok(())
    }

    /// Digest over model, prompts, and parameters. Two requests share a key
    /// only if every one of those fields is identical.
    pub fn cache_key(&self) -> String {
        let payload = serde_json::json!([
            "completion/v1",
            self.model,
            self.system_prompt,
            self.user_prompt,
            self.temperature,
            self.max_tokens,
        ]);
        digest_hex(payload.to_string().as_bytes())
    }
}

/// Cache key for one (embedding model, text) pair.
pub fn embedding_cache_key(model: &str, text: &str) -> String {
    let payload = serde_json::json!(["embedding/v1", model, text]);
    digest_hex(payload.to_string().as_bytes())
}

fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A fixed-length embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Self {
        EmbeddingVector { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Cosine similarity, accumulated in f64. Zero-norm vectors score 0.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        let mut dot = 0.0f64;
        let mut na = 0.0f64;
        let mut nb = 0.0f64;
        for (a, b) in self.values.iter().zip(&other.values) {
            dot += f64::from(*a) * f64::from(*b);
            na += f64::from(*a) * f64::from(*a);
            nb += f64::from(*b) * f64::from(*b);
        }
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        dot / (na.sqrt() * nb.sqrt())
    }
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String>;
}

pub trait EmbeddingBackend: Send + Sync {
    /// Embed a batch, one vector per text, same order.
    fn embed(&self, model: &str, texts: &[String]) -> Result<Vec<EmbeddingVector>>;
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<T> {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        (**self).complete(request)
    }
}

impl<T: EmbeddingBackend + ?Sized> EmbeddingBackend for std::sync::Arc<T> {
    fn embed(&self, model: &str, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        (**self).embed(model, texts)
    }
}

/// Directory-backed response cache: one file per digest.
///
/// Completions store the raw provider text; embeddings store packed
/// little-endian f32 values.
pub struct ResponseCache {
    completions: PathBuf,
    embeddings: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "tmp.{}.{}",
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

impl ResponseCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let completions = dir.join("completions");
        let embeddings = dir.join("embeddings");
        std::fs::create_dir_all(&completions).map_err(|e| Error::io(&completions, e))?;
        std::fs::create_dir_all(&embeddings).map_err(|e| Error::io(&embeddings, e))?;
        Ok(ResponseCache {
            completions,
            embeddings,
        })
    }

    pub fn get_completion(&self, key: &str) -> Option<String> {
        std::fs::read_to_string(self.completions.join(format!("{key}.txt"))).ok()
    }

    pub fn put_completion(&self, key: &str, text: &str) -> Result<()> {
        write_atomic(&self.completions.join(format!("{key}.txt")), text.as_bytes())
    }

    pub fn get_embedding(&self, key: &str) -> Option<EmbeddingVector> {
        let bytes = std::fs::read(self.embeddings.join(format!("{key}.bin"))).ok()?;
        if bytes.len() % 4 != 0 {
            return None;
        }
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Some(EmbeddingVector::new(values))
    }

    pub fn put_embedding(&self, key: &str, vector: &EmbeddingVector) -> Result<()> {
        let mut bytes = Vec::with_capacity(vector.values.len() * 4);
        for v in &vector.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        write_atomic(&self.embeddings.join(format!("{key}.bin")), &bytes)
    }
}

/// Counting semaphore bounding concurrent outbound requests.
struct Limiter {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Limiter {
    fn new(permits: usize) -> Self {
        Limiter {
            permits: Mutex::new(permits.max(1)),
            available: Condvar::new(),
        }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
        drop(permits);
        let out = f();
        *self.permits.lock().unwrap() += 1;
        self.available.notify_one();
        out
    }
}

/// Gateway tuning knobs; model names ride along on requests.
#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub completion_model: String,
    pub embedding_model: String,
    pub offline: bool,
    pub max_concurrency: usize,
    pub retry_attempts: u32,
    pub retry_base_delay: Duration,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            completion_model: "default-model".into(),
            embedding_model: "default-embedding".into(),
            offline: false,
            max_concurrency: 4,
            retry_attempts: 3,
            retry_base_delay: Duration::from_millis(200),
        }
    }
}

/// Cached, retrying front door for all model traffic.
pub struct Gateway {
    config: GatewayConfig,
    completion: Option<Box<dyn CompletionBackend>>,
    embedding: Option<Box<dyn EmbeddingBackend>>,
    cache: Option<ResponseCache>,
    limiter: Limiter,
    inflight: Mutex<HashMap<String, std::sync::Arc<Mutex<()>>>>,
}

impl Gateway {
    pub fn new(
        config: GatewayConfig,
        completion: Option<Box<dyn CompletionBackend>>,
        embedding: Option<Box<dyn EmbeddingBackend>>,
        cache: Option<ResponseCache>,
    ) -> Self {
        let limiter = Limiter::new(config.max_concurrency);
        Gateway {
            config,
            completion,
            embedding,
            cache,
            limiter,
            inflight: Mutex::new(HashMap::new()),
        }
    }

    /// A gateway with no backends: cache hits only.
    pub fn offline(mut config: GatewayConfig, cache: ResponseCache) -> Self {
        config.offline = true;
        Gateway::new(config, None, None, Some(cache))
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// Build a request against the configured completion model.
    pub fn request(&self, system_prompt: &str, user_prompt: &str) -> CompletionRequest {
        CompletionRequest::new(&self.config.completion_model, system_prompt, user_prompt)
    }

    fn with_key_lock<T>(&self, key: &str, f: impl FnOnce() -> T) -> T {
        let slot = {
            let mut map = self.inflight.lock().unwrap();
            map.entry(key.to_owned()).or_default().clone()
        };
        let _guard = slot.lock().unwrap();
        f()
    }

    fn with_retries<T>(&self, mut f: impl FnMut() -> Result<T>) -> Result<T> {
        let attempts = self.config.retry_attempts.max(1);
        let mut delay = self.config.retry_base_delay;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match f() {
                Ok(v) => return Ok(v),
                Err(Error::Transient { message, .. }) => {
                    log::warn!("transient backend failure (attempt {attempt}/{attempts}): {message}");
                    last = message;
                    if attempt < attempts {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
                Err(other) => return Err(other),
            }
        }
        Err(Error::Transient {
            attempts,
            message: last,
        })
    }

    /// Complete a request, serving from cache when possible.
    pub fn complete(&self, request: &CompletionRequest) -> Result<String> {
        request.validate()?;
        let key = request.cache_key();
        self.with_key_lock(&key, || {
            if let Some(cache) = &self.cache {
                if let Some(hit) = cache.get_completion(&key) {
                    return Ok(hit);
                }
            }
            let backend = match &self.completion {
                Some(b) if !self.config.offline => b,
                _ => return Err(Error::OfflineMiss { key: key.clone() }),
            };
            let text = self.with_retries(|| self.limiter.run(|| backend.complete(request)))?;
            if let Some(cache) = &self.cache {
                cache.put_completion(&key, &text)?;
            }
            Ok(text)
        })
    }

    /// Embed texts in order, one vector per input, all the same dimension.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        if texts.iter().any(|t| t.is_empty()) {
            return Err(Error::Precondition("embedding texts must be non-empty".into()));
        }
        let model = self.config.embedding_model.clone();
        let keys: Vec<String> = texts
            .iter()
            .map(|t| embedding_cache_key(&model, t))
            .collect();

        let mut out: Vec<Option<EmbeddingVector>> = keys
            .iter()
            .map(|k| self.cache.as_ref().and_then(|c| c.get_embedding(k)))
            .collect();

        let missing: Vec<usize> = (0..texts.len()).filter(|i| out[*i].is_none()).collect();
        if !missing.is_empty() {
            let backend = match &self.embedding {
                Some(b) if !self.config.offline => b,
                _ => {
                    return Err(Error::OfflineMiss {
                        key: keys[missing[0]].clone(),
                    })
                }
            };
            let batch: Vec<String> = missing.iter().map(|i| texts[*i].clone()).collect();
            let fetched =
                self.with_retries(|| self.limiter.run(|| backend.embed(&model, &batch)))?;
            if fetched.len() != batch.len() {
                return Err(Error::Provider(format!(
                    "embedding count mismatch: sent {}, got {}",
                    batch.len(),
                    fetched.len()
                )));
            }
            for (slot, vector) in missing.iter().zip(fetched) {
                if !vector.is_finite() {
                    return Err(Error::Provider("non-finite embedding value".into()));
                }
                if let Some(cache) = &self.cache {
                    cache.put_embedding(&keys[*slot], &vector)?;
                }
                out[*slot] = Some(vector);
            }
        }

        let vectors: Vec<EmbeddingVector> = out.into_iter().map(Option::unwrap).collect();
        if let Some(first) = vectors.first() {
            let dim = first.dimension();
            if vectors.iter().any(|v| v.dimension() != dim) {
                return Err(Error::Provider("dimension mismatch across batch".into()));
            }
        }
        Ok(vectors)
    }

    /// Embed a single text.
    pub fn embed_one(&self, text: &str) -> Result<EmbeddingVector> {
        Ok(self.embed(std::slice::from_ref(&text.to_owned()))?.remove(0))
    }
}
