//! `sparqa`: few-shot text-to-SPARQL question answering.
//!
//! Exit codes: 0 success, 1 usage or configuration error (and, for `lint`,
//! hard issues found), 2 pipeline failure.

mod commands;
mod config;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "sparqa", version, about = "Few-shot SPARQL generation over scholarly knowledge graphs")]
struct Cli {
    /// TOML run configuration; flags and environment variables override it.
    #[arg(long, global = true, env = "SPARQA_CONFIG")]
    config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Embed every training question and write the index file.
    Index(IndexArgs),
    /// Answer one question, printing every intermediate artifact.
    Ask(AskArgs),
    /// Answer every question of a split and write a JSONL results file.
    Batch(BatchArgs),
    /// Score a results file against gold answers.
    Evaluate(EvaluateArgs),
    /// Check SPARQL queries for structural defects.
    Lint(LintArgs),
    /// Render text tables from evaluation reports.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct DataArgs {
    /// Training split (JSON).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Index file; defaults to the training file with extension `.idx`.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Dataset field mapping, e.g. `records=questions,question=question.string,query=query.sparql`.
    #[arg(long, visible_alias = "field-map")]
    pub fields: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EmbedderKind {
    Trigram,
    Remote,
}

#[derive(Args, Debug, Clone, Default)]
pub struct EmbedderArgs {
    #[arg(long, value_enum)]
    pub embedder: Option<EmbedderKind>,
    /// Vector dimension (trigram buckets, or the remote model's size).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, env = "SPARQA_EMBEDDER_URL")]
    pub embedder_url: Option<String>,
    /// Provider id recorded in the index for a remote embedder.
    #[arg(long)]
    pub embedder_id: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Http,
    EchoNearest,
    Replay,
}

#[derive(Args, Debug, Clone, Default)]
pub struct LlmArgs {
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Completion service URL.
    #[arg(long, env = "SPARQA_LLM_URL")]
    pub llm_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub llm_timeout: Option<f64>,
    #[arg(long)]
    pub llm_retries: Option<u32>,
    /// Cassette to replay with `--backend replay`.
    #[arg(long)]
    pub cassette: Option<PathBuf>,
    /// Record every completion into this cassette file.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct EndpointArgs {
    /// SPARQL endpoint URL.
    #[arg(long, env = "SPARQA_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub endpoint_timeout: Option<f64>,
    #[arg(long)]
    pub endpoint_retries: Option<u32>,
    /// Append `LIMIT n` to SELECT queries that have none.
    #[arg(long)]
    pub limit_guard: Option<u64>,
    /// Compare raw lexical forms instead of normalized values.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PromptArgs {
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Prompt template with `{example}` and `{test question}` placeholders.
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Prefix table (TSV: prefix, IRI).
    #[arg(long)]
    pub prefixes: Option<PathBuf>,
    /// Prepend missing PREFIX declarations before execution.
    #[arg(long)]
    pub add_prefixes: bool,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub embedder: EmbedderArgs,
    #[arg(long)]
    pub concurrency: Option<usize>,
}

#[derive(Args, Debug)]
pub struct AskArgs {
    pub question: String,
    /// Stop before running the query against the endpoint.
    #[arg(long)]
    pub dry_run: bool,
    /// Print the trace as JSON.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub embedder: EmbedderArgs,
    #[command(flatten)]
    pub prompt: PromptArgs,
    #[command(flatten)]
    pub llm: LlmArgs,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Args, Debug)]
pub struct BatchArgs {
    #[arg(long, default_value = "dev")]
    pub split: sparqa_core::Split,
    /// Questions to answer; defaults to the configured path for the split.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Results file (JSONL).
    #[arg(long)]
    pub out: PathBuf,
    /// Keep records already in the output file and answer only the rest.
    #[arg(long)]
    pub resume: bool,
    /// Run once per shot count, writing `<stem>.<n>shot.jsonl` each.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Vec<usize>,
    #[arg(long)]
    pub dry_run: bool,
    /// Maximum in-flight questions.
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub embedder: EmbedderArgs,
    #[command(flatten)]
    pub prompt: PromptArgs,
    #[command(flatten)]
    pub llm: LlmArgs,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GoldSource {
    /// Use the answers stored in the gold file.
    File,
    /// Run each gold query against the endpoint.
    Execute,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Gold dataset file.
    #[arg(long)]
    pub gold: PathBuf,
    /// Results file written by `batch`.
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long, value_enum, default_value = "file")]
    pub gold_source: GoldSource,
    #[arg(long, default_value = "dev")]
    pub split: sparqa_core::Split,
    /// Write the machine-readable report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, visible_alias = "field-map")]
    pub fields: Option<String>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Args, Debug)]
pub struct LintArgs {
    /// Files holding one query each; `-` reads standard input.
    pub files: Vec<PathBuf>,
    /// Query text to check (repeatable).
    #[arg(long = "query")]
    pub queries: Vec<String>,
    /// Check every gold query of a dataset file.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, visible_alias = "field-map")]
    pub fields: Option<String>,
    #[arg(long)]
    pub prefixes: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Report files written by `evaluate --out`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Also list every question that is not correct.
    #[arg(long)]
    pub details: bool,
}

/// The error chain on one line. Library errors often repeat their cause in
/// their own message, so causes already shown are skipped.
fn describe(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !out.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let file = match cli.config.as_deref().map(config::FileConfig::load).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Index(a) => commands::index(&a, &file),
        Command::Ask(a) => commands::ask(&a, &file),
        Command::Batch(a) => commands::batch(&a, &file),
        Command::Evaluate(a) => commands::evaluate(&a, &file),
        Command::Lint(a) => commands::lint(&a, &file),
        Command::Report(a) => commands::report(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e.error));
            ExitCode::from(e.code)
        }
    }
}
