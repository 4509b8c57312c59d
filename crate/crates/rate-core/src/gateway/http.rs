//! HTTP backend speaking the common chat-completions / embeddings shapes.
//!
//! Connection failures, timeouts, 429 and 5xx responses are reported as
//! transient (the gateway retries those); malformed payloads and other 4xx
//! statuses are permanent provider errors.

use serde::Deserialize;

use super::{CompletionBackend, CompletionRequest, EmbeddingBackend, EmbeddingVector};
use crate::error::{Error, Result};

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .connect_timeout(std::time::Duration::from_secs(10))
            .timeout(std::time::Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Provider(format!("http client: {e}")))?;
        Ok(HttpBackend {
            client,
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            api_key,
        })
    }

    fn post(&self, path: &str, body: serde_json::Value) -> Result<serde_json::Value> {
        let url = format!("{}{path}", self.base_url);
        let mut request = self.client.post(&url).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| Error::Transient {
            attempts: 1,
            message: format!("{url}: {e}"),
        })?;
        let status = response.status();
        let text = response.text().map_err(|e| Error::Transient {
            attempts: 1,
            message: format!("{url}: reading body: {e}"),
        })?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Error::Transient {
                attempts: 1,
                message: format!("{url}: status {status}"),
            });
        }
        if !status.is_success() {
            return Err(Error::Provider(format!("{url}: status {status}: {text}")));
        }
        serde_json::from_str(&text)
            .map_err(|e| Error::Provider(format!("{url}: invalid JSON response: {e}")))
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingRow>,
}

#[derive(Deserialize)]
struct EmbeddingRow {
    index: usize,
    embedding: Vec<f32>,
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let body = serde_json::json!({
            "model": request.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let value = self.post("/chat/completions", body)?;
        let parsed: ChatResponse = serde_json::from_value(value)
            .map_err(|e| Error::Provider(format!("chat response shape: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Error::Provider("chat response has no choices".into()))?;
        Ok(choice.message.content)
    }
}

impl EmbeddingBackend for HttpBackend {
    fn embed(&self, model: &str, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let body = serde_json::json!({ "model": model, "input": texts });
        let value = self.post("/embeddings", body)?;
        let parsed: EmbeddingsResponse = serde_json::from_value(value)
            .map_err(|e| Error::Provider(format!("embeddings response shape: {e}")))?;
        if parsed.data.len() != texts.len() {
            return Err(Error::Provider(format!(
                "embeddings response: sent {} texts, got {} rows",
                texts.len(),
                parsed.data.len()
            )));
        }
        let mut rows = parsed.data;
        rows.sort_by_key(|r| r.index);
        Ok(rows
            .into_iter()
            .map(|r| EmbeddingVector::new(r.embedding))
            .collect())
    }
}
