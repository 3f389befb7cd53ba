use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::LlmConfig;
use crate::http::{self, is_transient_status, json_path, HttpFailure};
use crate::prompt::FewShotPrompt;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {code}: {body}")]
    Status { code: u16, body: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("no recorded completion for prompt {0}")]
    NotRecorded(String),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Timeout | BackendError::Transport(_) => true,
            BackendError::Status { code, .. } => is_transient_status(*code),
            BackendError::Protocol(_) | BackendError::NotRecorded(_) => false,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BackendError::Timeout => "timeout",
            BackendError::Transport(_) => "transport",
            BackendError::Status { .. } => "status",
            BackendError::Protocol(_) => "protocol",
            BackendError::NotRecorded(_) => "not_recorded",
        }
    }
}

impl From<HttpFailure> for BackendError {
    fn from(f: HttpFailure) -> Self {
        match f {
            HttpFailure::Timeout => BackendError::Timeout,
            HttpFailure::Transport(m) => BackendError::Transport(m),
        }
    }
}

/// One completion per call; retries are handled by the caller.
pub trait LlmBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    fn complete(&self, prompt: &FewShotPrompt, config: &LlmConfig) -> Result<String, BackendError>;
}

impl<T: LlmBackend + ?Sized> LlmBackend for std::sync::Arc<T> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn complete(&self, prompt: &FewShotPrompt, config: &LlmConfig) -> Result<String, BackendError> {
        (**self).complete(prompt, config)
    }
}

impl<T: LlmBackend + ?Sized> LlmBackend for Box<T> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn complete(&self, prompt: &FewShotPrompt, config: &LlmConfig) -> Result<String, BackendError> {
        (**self).complete(prompt, config)
    }
}

/// JSON-over-HTTP completion service.
pub struct HttpBackend {
    agent: ureq::Agent,
    id: String,
}

impl HttpBackend {
    pub fn new(config: &LlmConfig) -> Self {
        Self { agent: http::agent(config.timeout), id: format!("http:{}", config.model_name) }
    }
}

const MAX_ERROR_BODY: usize = 512;

impl LlmBackend for HttpBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &FewShotPrompt, config: &LlmConfig) -> Result<String, BackendError> {
        let p = &config.protocol;
        let mut body = serde_json::Map::new();
        body.insert(p.model_field.clone(), json!(config.model_name));
        body.insert(p.prompt_field.clone(), json!(prompt.text));
        body.insert(p.temperature_field.clone(), json!(config.temperature));
        body.insert(p.max_tokens_field.clone(), json!(config.max_tokens));
        let mut req = self.agent.post(&config.endpoint_url);
        if let Some(key) = &config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let reply = http::read_reply(req.send_json(Value::Object(body)))?;
        if !(200..300).contains(&reply.status) {
            let mut text = String::from_utf8_lossy(&reply.body).into_owned();
            if text.len() > MAX_ERROR_BODY {
                let cut = (0..=MAX_ERROR_BODY).rev().find(|&i| text.is_char_boundary(i)).unwrap_or(0);
                text.truncate(cut);
            }
            return Err(BackendError::Status { code: reply.status, body: text });
        }
        let doc: Value = serde_json::from_slice(&reply.body).map_err(|e| BackendError::Protocol(e.to_string()))?;
        json_path(&doc, &p.response_path)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Protocol(format!("no string at `{}`", p.response_path)))
    }
}

/// Offline backend that answers with the gold query of the most similar
/// example. Useful as a retrieval-only baseline and for wiring tests.
#[derive(Debug, Clone, Default)]
pub struct EchoNearestBackend;

impl LlmBackend for EchoNearestBackend {
    fn backend_id(&self) -> &str {
        "echo-nearest"
    }

    fn complete(&self, prompt: &FewShotPrompt, _: &LlmConfig) -> Result<String, BackendError> {
        prompt
            .examples
            .first()
            .map(|b| b.sparql.clone())
            .ok_or_else(|| BackendError::Protocol("prompt has no examples".into()))
    }
}

pub const CASSETTE_VERSION: u32 = 1;

/// Recorded completions keyed by prompt SHA-256.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cassette {
    pub version: u32,
    pub completions: BTreeMap<String, String>,
}

impl Cassette {
    pub fn new() -> Self {
        Self { version: CASSETTE_VERSION, completions: BTreeMap::new() }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let c: Cassette =
            serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        if c.version != CASSETTE_VERSION {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("unsupported cassette version {}", c.version),
            ));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("cassette serializes");
        text.push('\n');
        std::fs::write(path, text)
    }
}

/// Plays back a cassette; prompts that were never recorded fail.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    cassette: Cassette,
}

impl ReplayBackend {
    pub fn new(cassette: Cassette) -> Self {
        Self { cassette }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Cassette::load(path).map(Self::new)
    }
}

impl LlmBackend for ReplayBackend {
    fn backend_id(&self) -> &str {
        "replay"
    }

    fn complete(&self, prompt: &FewShotPrompt, _: &LlmConfig) -> Result<String, BackendError> {
        let key = prompt.sha256();
        self.cassette.completions.get(&key).cloned().ok_or(BackendError::NotRecorded(key))
    }
}

/// Wraps another backend and records every successful completion.
pub struct RecordingBackend<B> {
    inner: B,
    id: String,
    recorded: Mutex<Cassette>,
}

impl<B: LlmBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        let id = inner.backend_id().to_string();
        Self { inner, id, recorded: Mutex::new(Cassette::new()) }
    }

    pub fn cassette(&self) -> Cassette {
        self.recorded.lock().expect("recorder lock").clone()
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn complete(&self, prompt: &FewShotPrompt, config: &LlmConfig) -> Result<String, BackendError> {
        let text = self.inner.complete(prompt, config)?;
        self.recorded.lock().expect("recorder lock").completions.insert(prompt.sha256(), text.clone());
        Ok(text)
    }
}
