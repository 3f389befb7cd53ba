//! Resolve effective settings: flag, then environment (through clap), then
//! config file, then built-in default.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};

use sparqa_core::corpus::{load_split_with, FieldMap};
use sparqa_core::endpoint::{EndpointConfig, ORKG_ENDPOINT};
use sparqa_core::generation::{
    Cassette, EchoNearestBackend, HttpBackend, LlmBackend, LlmConfig, RecordingBackend, ReplayBackend,
};
use sparqa_core::prompt::{PromptTemplate, DEFAULT_SHOTS};
use sparqa_core::retrieval::{Embedder, HashedTrigramEmbedder, RemoteEmbedder, RemoteEmbedderConfig, DEFAULT_TOP_N};
use sparqa_core::sparql::PrefixTable;
use sparqa_core::{Corpus, Normalization, Split};

use crate::config::FileConfig;
use crate::{BackendKind, DataArgs, EmbedderArgs, EmbedderKind, EndpointArgs, LlmArgs, PromptArgs};

pub const DEFAULT_CONCURRENCY: usize = 4;

pub fn field_map(flag: Option<&str>, file: &FileConfig) -> anyhow::Result<FieldMap> {
    match flag.or(file.retrieval.fields.as_deref()) {
        Some(spec) => spec.parse().map_err(|e| anyhow!("--fields: {e}")),
        None => Ok(FieldMap::default()),
    }
}

pub fn normalization(args: &EndpointArgs, file: &FileConfig) -> anyhow::Result<Normalization> {
    if args.strict {
        return Ok(Normalization::Strict);
    }
    match file.endpoint.normalization.as_deref() {
        None | Some("lenient") => Ok(Normalization::Lenient),
        Some("strict") => Ok(Normalization::Strict),
        Some(other) => bail!("endpoint.normalization must be `lenient` or `strict`, not `{other}`"),
    }
}

pub fn train_path(args: &DataArgs, file: &FileConfig) -> anyhow::Result<PathBuf> {
    args.train
        .clone()
        .or_else(|| file.paths.train.clone())
        .ok_or_else(|| anyhow!("no training file: pass --train or set paths.train"))
}

pub fn index_path(args: &DataArgs, file: &FileConfig) -> anyhow::Result<PathBuf> {
    if let Some(p) = args.index.clone().or_else(|| file.paths.index.clone()) {
        return Ok(p);
    }
    Ok(train_path(args, file)?.with_extension("idx"))
}

pub fn split_path(split: Split, file: &FileConfig) -> Option<PathBuf> {
    match split {
        Split::Train => file.paths.train.clone(),
        Split::Dev => file.paths.dev.clone(),
        Split::Test => file.paths.test.clone(),
    }
}

pub fn load_corpus(path: &Path, split: Split, fields: &FieldMap, mode: Normalization) -> anyhow::Result<Corpus> {
    load_split_with(path, split, fields, mode).with_context(|| format!("loading {split} split"))
}

pub fn embedder(args: &EmbedderArgs, file: &FileConfig) -> anyhow::Result<Box<dyn Embedder>> {
    let r = &file.retrieval;
    let kind = match (args.embedder, r.embedder.as_deref()) {
        (Some(k), _) => k,
        (None, None | Some("trigram")) => EmbedderKind::Trigram,
        (None, Some("remote")) => EmbedderKind::Remote,
        (None, Some(other)) => bail!("retrieval.embedder must be `trigram` or `remote`, not `{other}`"),
    };
    let dim = args.dim.or(r.dim);
    match kind {
        EmbedderKind::Trigram => {
            let dim = dim.unwrap_or(sparqa_core::retrieval::DEFAULT_TRIGRAM_DIM);
            if dim == 0 {
                bail!("--dim must be positive");
            }
            Ok(Box::new(HashedTrigramEmbedder::with_dim(dim)))
        }
        EmbedderKind::Remote => {
            let url = args
                .embedder_url
                .clone()
                .or_else(|| r.embedder_url.clone())
                .ok_or_else(|| anyhow!("remote embedder needs --embedder-url or SPARQA_EMBEDDER_URL"))?;
            let dim = dim.ok_or_else(|| anyhow!("remote embedder needs --dim"))?;
            let id =
                args.embedder_id.clone().or_else(|| r.embedder_id.clone()).unwrap_or_else(|| format!("remote:{url}"));
            let mut cfg = RemoteEmbedderConfig::new(url, id, dim);
            cfg.model = r.embedder_model.clone();
            if let Some(f) = &r.embedder_input_field {
                cfg.input_field = f.clone();
            }
            if let Some(p) = &r.embedder_response_path {
                cfg.response_path = p.clone();
            }
            Ok(Box::new(RemoteEmbedder::new(cfg)))
        }
    }
}

fn secs(value: f64, what: &str) -> anyhow::Result<Duration> {
    Duration::try_from_secs_f64(value).map_err(|_| anyhow!("{what} must be a non-negative number of seconds"))
}

pub fn llm_config(args: &LlmArgs, file: &FileConfig) -> anyhow::Result<LlmConfig> {
    let l = &file.llm;
    let mut cfg = LlmConfig::default();
    if let Some(u) = args.llm_url.clone().or_else(|| l.url.clone()) {
        cfg.endpoint_url = u;
    }
    if let Some(m) = args.model.clone().or_else(|| l.model.clone()) {
        cfg.model_name = m;
    }
    if let Some(t) = l.temperature {
        if t.is_nan() || t < 0.0 {
            bail!("llm.temperature must be >= 0");
        }
        cfg.temperature = t;
    }
    if let Some(n) = args.max_tokens.or(l.max_tokens) {
        if n == 0 {
            bail!("max_tokens must be positive");
        }
        cfg.max_tokens = n;
    }
    if let Some(t) = args.llm_timeout.or(l.timeout_secs) {
        cfg.timeout = secs(t, "llm timeout")?;
    }
    if let Some(r) = args.llm_retries.or(l.max_retries) {
        cfg.max_retries = r;
    }
    if let Some(p) = l.protocol.clone() {
        cfg.protocol = p;
    }
    cfg.api_key = std::env::var("SPARQA_LLM_API_KEY").ok().filter(|k| !k.is_empty());
    Ok(cfg)
}

pub type Recorder = Arc<RecordingBackend<Box<dyn LlmBackend>>>;

/// The configured backend, wrapped in a recorder when `--record` is given.
pub fn backend(
    args: &LlmArgs,
    file: &FileConfig,
    cfg: &LlmConfig,
) -> anyhow::Result<(Box<dyn LlmBackend>, Option<Recorder>)> {
    let kind = match (args.backend, file.llm.backend.as_deref()) {
        (Some(k), _) => k,
        (None, None | Some("http")) => BackendKind::Http,
        (None, Some("echo-nearest")) => BackendKind::EchoNearest,
        (None, Some("replay")) => BackendKind::Replay,
        (None, Some(other)) => bail!("llm.backend must be `http`, `echo-nearest` or `replay`, not `{other}`"),
    };
    let inner: Box<dyn LlmBackend> = match kind {
        BackendKind::Http => Box::new(HttpBackend::new(cfg)),
        BackendKind::EchoNearest => Box::new(EchoNearestBackend),
        BackendKind::Replay => {
            let path = args
                .cassette
                .clone()
                .or_else(|| file.llm.cassette.clone())
                .ok_or_else(|| anyhow!("--backend replay needs --cassette"))?;
            Box::new(ReplayBackend::load(&path).with_context(|| format!("loading cassette {}", path.display()))?)
        }
    };
    if args.record.is_none() {
        return Ok((inner, None));
    }
    let recorder = Arc::new(RecordingBackend::new(inner));
    Ok((Box::new(recorder.clone()), Some(recorder)))
}

/// Merge newly recorded completions into the cassette at `path`.
pub fn save_recording(recorder: &Recorder, path: &Path) -> anyhow::Result<()> {
    let mut cassette = if path.exists() {
        Cassette::load(path).with_context(|| format!("loading {}", path.display()))?
    } else {
        Cassette::new()
    };
    cassette.completions.extend(recorder.cassette().completions);
    cassette.save(path).with_context(|| format!("writing {}", path.display()))
}

pub fn endpoint_config(args: &EndpointArgs, file: &FileConfig) -> anyhow::Result<EndpointConfig> {
    let e = &file.endpoint;
    let url = args.endpoint.clone().or_else(|| e.url.clone()).unwrap_or_else(|| ORKG_ENDPOINT.to_string());
    if url.trim().is_empty() {
        bail!("endpoint URL is empty");
    }
    let mut cfg = EndpointConfig::new(url);
    if let Some(t) = args.endpoint_timeout.or(e.timeout_secs) {
        cfg.timeout = secs(t, "endpoint timeout")?;
    }
    if let Some(r) = args.endpoint_retries.or(e.max_retries) {
        cfg.max_retries = r;
    }
    cfg.result_limit_guard = args.limit_guard.or(e.result_limit_guard);
    if cfg.result_limit_guard == Some(0) {
        bail!("limit guard must be positive");
    }
    cfg.normalization = normalization(args, file)?;
    Ok(cfg)
}

pub fn template(args: &PromptArgs, file: &FileConfig) -> anyhow::Result<PromptTemplate> {
    match args.template.clone().or_else(|| file.paths.template.clone()) {
        Some(p) => PromptTemplate::load(&p).with_context(|| format!("template {}", p.display())),
        None => Ok(PromptTemplate::canonical()),
    }
}

pub fn prefixes(flag: Option<&Path>, file: &FileConfig) -> anyhow::Result<PrefixTable> {
    match flag.map(Path::to_path_buf).or_else(|| file.paths.prefixes.clone()) {
        Some(p) => PrefixTable::load(&p).with_context(|| format!("prefix table {}", p.display())),
        None => Ok(PrefixTable::default()),
    }
}

pub fn shots_and_top_n(args: &PromptArgs, file: &FileConfig) -> (usize, usize) {
    let shots = args.shots.or(file.retrieval.shots).unwrap_or(DEFAULT_SHOTS);
    let top_n = args.top_n.or(file.retrieval.top_n).unwrap_or(DEFAULT_TOP_N);
    (shots, top_n)
}

pub fn concurrency(flag: Option<usize>, file: &FileConfig) -> anyhow::Result<usize> {
    let n = flag.or(file.run.concurrency).unwrap_or(DEFAULT_CONCURRENCY);
    if n == 0 {
        bail!("concurrency must be positive");
    }
    Ok(n)
}
