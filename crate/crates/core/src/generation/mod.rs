//! LLM completion: a backend trait, the HTTP client plus offline backends,
//! and extraction of the query from the raw completion text.
//!
//! Decoding is greedy (temperature 0) and completions are used as returned:
//! there is no resampling on invalid output and no post-editing beyond
//! extraction.

mod backend;
mod extract;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    BackendError, Cassette, EchoNearestBackend, HttpBackend, LlmBackend, RecordingBackend, ReplayBackend,
    CASSETTE_VERSION,
};
pub use extract::{extract_sparql, extract_text, ExtractError, ExtractedQuery, ExtractionMethod};

use crate::http::{with_retries, Attempt};
use crate::prompt::FewShotPrompt;

/// Request field names and response location for a completion service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolMapping {
    pub model_field: String,
    pub prompt_field: String,
    pub temperature_field: String,
    pub max_tokens_field: String,
    /// Dotted path of the completion text, e.g. `choices.0.text` for an
    /// OpenAI-compatible completions endpoint.
    pub response_path: String,
}

impl Default for ProtocolMapping {
    fn default() -> Self {
        Self {
            model_field: "model".into(),
            prompt_field: "prompt".into(),
            temperature_field: "temperature".into(),
            max_tokens_field: "max_tokens".into(),
            response_path: "choices.0.text".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout: Duration,
    pub max_retries: u32,
    pub retry_base_delay: Duration,
    pub api_key: Option<String>,
    pub protocol: ProtocolMapping,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "http://127.0.0.1:8000/v1/completions".into(),
            model_name: "vicuna-13b".into(),
            temperature: 0.0,
            max_tokens: 512,
            timeout: Duration::from_secs(120),
            max_retries: 2,
            retry_base_delay: Duration::from_millis(500),
            api_key: None,
            protocol: ProtocolMapping::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCompletion {
    pub text: String,
    #[serde(with = "millis")]
    pub latency: Duration,
    pub backend_id: String,
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerationError {
    #[error("LLM backend failed after {attempts} attempt(s): {source}")]
    Backend { attempts: u32, source: BackendError },
    #[error("LLM returned an empty completion")]
    EmptyCompletion,
}

impl GenerationError {
    /// Short machine-readable kind for batch records.
    pub fn kind(&self) -> &'static str {
        match self {
            GenerationError::Backend { source, .. } => source.kind(),
            GenerationError::EmptyCompletion => "empty_completion",
        }
    }
}

/// Request one completion, retrying transient failures with exponential
/// backoff.
pub fn generate(
    prompt: &FewShotPrompt,
    config: &LlmConfig,
    backend: &dyn LlmBackend,
) -> Result<RawCompletion, GenerationError> {
    let started = Instant::now();
    let (text, _) =
        with_retries(config.max_retries, config.retry_base_delay, || {
            backend.complete(prompt, config).map_err(|e| {
                if e.is_transient() {
                    Attempt::Retry(e)
                } else {
                    Attempt::Fail(e)
                }
            })
        })
        .map_err(|(source, attempts)| GenerationError::Backend { attempts, source })?;
    if text.trim().is_empty() {
        return Err(GenerationError::EmptyCompletion);
    }
    Ok(RawCompletion { text, latency: started.elapsed(), backend_id: backend.backend_id().to_string() })
}
