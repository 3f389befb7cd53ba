use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use crate::http::{self, json_path, HttpFailure};

/// Unit-length embedding. Constructed only through [`Vector::normalize`] or
/// [`Vector::from_unit`], so every instance satisfies `|‖v‖ − 1| ≤ 1e-9`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

pub const UNIT_TOLERANCE: f64 = 1e-9;

impl Vector {
    pub fn normalize(raw: Vec<f64>) -> Result<Self, EmbedError> {
        if raw.is_empty() {
            return Err(EmbedError::DimMismatch { expected: 1, got: 0 });
        }
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EmbedError::ZeroNorm);
        }
        Ok(Self(raw.into_iter().map(|x| x / norm).collect()))
    }

    /// Accept components that are already unit length.
    pub fn from_unit(components: Vec<f64>) -> Result<Self, EmbedError> {
        let norm = components.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(EmbedError::NotUnit(norm));
        }
        Ok(Self(components))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("embedding contains a non-finite component")]
    NonFinite,
    #[error("expected a unit vector, norm is {0}")]
    NotUnit(f64),
    #[error("expected dimension {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("embedding service unreachable: {0}")]
    Unreachable(String),
    #[error("embedding service protocol error: {0}")]
    Protocol(String),
}

/// A sentence encoder. `embed_raw` may return any non-zero vector of
/// length `dim()`; [`embed`] normalizes it.
pub trait Embedder: Send + Sync {
    /// Identity recorded in indexes; two embedders with the same id must
    /// produce the same vectors.
    fn provider_id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, EmbedError>;
}

pub fn embed(provider: &dyn Embedder, text: &str) -> Result<Vector, EmbedError> {
    if text.trim().is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let raw = provider.embed_raw(text)?;
    if raw.len() != provider.dim() {
        return Err(EmbedError::DimMismatch { expected: provider.dim(), got: raw.len() });
    }
    Vector::normalize(raw)
}

/// Offline fallback encoder: hashed character-trigram term frequencies.
///
/// The text is lowercased, whitespace runs collapse to one space, and the
/// result is padded with a single space on each side. Every window of three
/// consecutive `char`s is hashed with 64-bit FNV-1a over its UTF-8 bytes,
/// and bucket `hash % dim` is incremented. The count vector is then
/// L2-normalized by [`embed`].
#[derive(Debug, Clone)]
pub struct HashedTrigramEmbedder {
    dim: usize,
    id: String,
}

pub const DEFAULT_TRIGRAM_DIM: usize = 512;

impl Default for HashedTrigramEmbedder {
    fn default() -> Self {
        Self::with_dim(DEFAULT_TRIGRAM_DIM)
    }
}

impl HashedTrigramEmbedder {
    pub fn with_dim(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self { dim, id: format!("hashed-trigram-fnv1a-{dim}") }
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

impl Embedder for HashedTrigramEmbedder {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let lowered = text.to_lowercase();
        let mut padded = String::with_capacity(lowered.len() + 2);
        padded.push(' ');
        padded.push_str(&lowered.split_whitespace().collect::<Vec<_>>().join(" "));
        padded.push(' ');
        let chars: Vec<char> = padded.chars().collect();
        let mut counts = vec![0.0; self.dim];
        let mut buf = [0u8; 12];
        for w in chars.windows(3) {
            let mut n = 0;
            for c in w {
                n += c.encode_utf8(&mut buf[n..]).len();
            }
            counts[(fnv1a64(&buf[..n]) % self.dim as u64) as usize] += 1.0;
        }
        Ok(counts)
    }
}

/// Client for an HTTP embedding service that maps one text to one vector.
#[derive(Debug, Clone)]
pub struct RemoteEmbedderConfig {
    pub url: String,
    pub provider_id: String,
    pub dim: usize,
    pub model: Option<String>,
    /// Request field carrying the text.
    pub input_field: String,
    /// Dotted path of the vector in the response, e.g. `data.0.embedding`.
    pub response_path: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl RemoteEmbedderConfig {
    pub fn new(url: impl Into<String>, provider_id: impl Into<String>, dim: usize) -> Self {
        Self {
            url: url.into(),
            provider_id: provider_id.into(),
            dim,
            model: None,
            input_field: "input".into(),
            response_path: "embedding".into(),
            api_key: None,
            timeout: Duration::from_secs(30),
        }
    }
}

pub struct RemoteEmbedder {
    config: RemoteEmbedderConfig,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Self {
        let agent = http::agent(config.timeout);
        Self { config, agent }
    }
}

impl Embedder for RemoteEmbedder {
    fn provider_id(&self) -> &str {
        &self.config.provider_id
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut body = serde_json::Map::new();
        body.insert(self.config.input_field.clone(), json!(text));
        if let Some(model) = &self.config.model {
            body.insert("model".into(), json!(model));
        }
        let mut req = self.agent.post(&self.config.url);
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let reply = http::read_reply(req.send_json(Value::Object(body))).map_err(|e| match e {
            HttpFailure::Timeout => EmbedError::Unreachable("timed out".into()),
            HttpFailure::Transport(m) => EmbedError::Unreachable(m),
        })?;
        if !(200..300).contains(&reply.status) {
            return Err(EmbedError::Protocol(format!("status {}", reply.status)));
        }
        let doc: Value = serde_json::from_slice(&reply.body).map_err(|e| EmbedError::Protocol(e.to_string()))?;
        json_path(&doc, &self.config.response_path)
            .and_then(Value::as_array)
            .ok_or_else(|| EmbedError::Protocol(format!("no array at `{}`", self.config.response_path)))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| EmbedError::Protocol("non-numeric component".into())))
            .collect()
    }
}

/// Cosine similarity of two unit vectors: their dot product, clamped to
/// `[-1, 1]`.
pub fn cosine(u: &Vector, v: &Vector) -> Result<f64, EmbedError> {
    if u.dim() != v.dim() {
        return Err(EmbedError::DimMismatch { expected: u.dim(), got: v.dim() });
    }
    Ok(dot(u.as_slice(), v.as_slice()).clamp(-1.0, 1.0))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
