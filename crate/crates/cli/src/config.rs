//! Run configuration file (TOML). Every field is optional; command-line
//! flags and environment variables take precedence.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

use sparqa_core::generation::ProtocolMapping;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub version: Option<u32>,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub llm: LlmSection,
    #[serde(default)]
    pub endpoint: EndpointSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub template: Option<PathBuf>,
    pub prefixes: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalConfig {
    pub top_n: Option<usize>,
    pub shots: Option<usize>,
    /// `trigram` or `remote`.
    pub embedder: Option<String>,
    pub dim: Option<usize>,
    pub embedder_url: Option<String>,
    pub embedder_id: Option<String>,
    pub embedder_model: Option<String>,
    pub embedder_input_field: Option<String>,
    pub embedder_response_path: Option<String>,
    /// Field mapping for dataset files, `key=path,...`.
    pub fields: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    /// `http`, `echo-nearest` or `replay`.
    pub backend: Option<String>,
    pub url: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub timeout_secs: Option<f64>,
    pub max_retries: Option<u32>,
    pub cassette: Option<PathBuf>,
    pub protocol: Option<ProtocolMapping>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSection {
    pub url: Option<String>,
    pub timeout_secs: Option<f64>,
    pub max_retries: Option<u32>,
    pub result_limit_guard: Option<u64>,
    /// `lenient` or `strict`.
    pub normalization: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub concurrency: Option<usize>,
    pub add_prefixes: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: FileConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        match cfg.version {
            None | Some(CONFIG_VERSION) => Ok(cfg),
            Some(v) => bail!("{}: unsupported config version {v}", path.display()),
        }
    }
}
