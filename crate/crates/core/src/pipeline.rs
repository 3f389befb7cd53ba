//! End-to-end question answering and the resumable batch driver.
//!
//! Stages run in order: retrieval, prompt, generation, extraction,
//! execution. A failure stops the question and is recorded with its stage;
//! a batch always continues with the next question.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::AnswerSet;
use crate::corpus::{Corpus, QaPair};
use crate::endpoint::QueryExecutor;
use crate::evaluation::{SystemAnswer, SystemRecord};
use crate::exec::Execution;
use crate::generation::{
    extract_sparql, generate, ExtractedQuery, ExtractionMethod, LlmBackend, LlmConfig, RawCompletion,
};
use crate::prompt::{build_prompt, render_examples, select_examples, FewShotPrompt, PromptTemplate};
use crate::retrieval::{Embedder, EmbeddingIndex, Neighbor};
use crate::sparql::{ensure_prefixes, validate_with, PrefixTable, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Retrieval,
    Prompt,
    Generation,
    Extraction,
    Execution,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Retrieval => "retrieval",
            Stage::Prompt => "prompt",
            Stage::Generation => "generation",
            Stage::Extraction => "extraction",
            Stage::Execution => "execution",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Answer {
        answer: AnswerSet,
    },
    Error {
        stage: Stage,
        kind: String,
        message: String,
    },
    /// Dry run: stopped before execution.
    NotExecuted,
}

impl Outcome {
    fn error(stage: Stage, kind: impl Into<String>, message: impl fmt::Display) -> Self {
        Outcome::Error { stage, kind: kind.into(), message: message.to_string() }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Outcome::Error { .. })
    }

    pub fn system_answer(&self) -> SystemAnswer<'_> {
        match self {
            Outcome::Answer { answer } => SystemAnswer::Answer(answer),
            Outcome::Error { stage, kind, .. } => {
                SystemAnswer::Failed { syntax_rejected: *stage == Stage::Execution && kind == "SYNTAX_REJECTED" }
            }
            Outcome::NotExecuted => SystemAnswer::Failed { syntax_rejected: false },
        }
    }
}

/// Everything produced for one question.
#[derive(Debug, Clone)]
pub struct Trace {
    pub neighbors: Vec<Neighbor>,
    pub prompt: Option<FewShotPrompt>,
    pub completion: Option<RawCompletion>,
    pub extracted: Option<ExtractedQuery>,
    /// The query as sent to the endpoint.
    pub executed_sparql: Option<String>,
    pub validation: Option<ValidationReport>,
    pub outcome: Outcome,
}

pub struct Pipeline {
    pub train: Corpus,
    pub index: EmbeddingIndex,
    pub embedder: Box<dyn Embedder>,
    pub template: PromptTemplate,
    pub backend: Box<dyn LlmBackend>,
    pub llm: LlmConfig,
    /// `None` makes every run a dry run.
    pub executor: Option<Box<dyn QueryExecutor>>,
    pub prefixes: PrefixTable,
    pub top_n: usize,
    pub shots: usize,
    /// Prepend missing `PREFIX` declarations before execution.
    pub add_prefixes: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("shot count {shots} must be between 1 and top_n ({top_n})")]
    Shots { shots: usize, top_n: usize },
    #[error("top_n {top_n} exceeds the training set size {train}")]
    TopN { top_n: usize, train: usize },
    #[error("index has {index} entries but the training set has {train}")]
    IndexSize { index: usize, train: usize },
}

impl Pipeline {
    pub fn check(&self) -> Result<(), PipelineError> {
        if self.shots == 0 || self.shots > self.top_n {
            return Err(PipelineError::Shots { shots: self.shots, top_n: self.top_n });
        }
        if self.top_n > self.train.len() {
            return Err(PipelineError::TopN { top_n: self.top_n, train: self.train.len() });
        }
        if self.index.len() != self.train.len() {
            return Err(PipelineError::IndexSize { index: self.index.len(), train: self.train.len() });
        }
        Ok(())
    }

    /// Retrieval and prompt construction only.
    pub fn prompt_for(&self, question: &str) -> Result<(Vec<Neighbor>, FewShotPrompt), Outcome> {
        let neighbors = self
            .index
            .top_n(self.embedder.as_ref(), question, self.top_n)
            .map_err(|e| Outcome::error(Stage::Retrieval, "retrieval", e))?;
        let blocks = select_examples(&self.train, &neighbors, self.shots)
            .map_err(|e| Outcome::error(Stage::Prompt, "prompt", &e))?;
        let prompt = render_examples(&blocks)
            .and_then(|r| build_prompt(&self.template, &r, question))
            .map_err(|e| Outcome::error(Stage::Prompt, "prompt", &e))?;
        Ok((neighbors, prompt))
    }

    pub fn ask(&self, question: &str, dry_run: bool) -> Trace {
        let mut trace = Trace {
            neighbors: Vec::new(),
            prompt: None,
            completion: None,
            extracted: None,
            executed_sparql: None,
            validation: None,
            outcome: Outcome::NotExecuted,
        };
        let prompt = match self.prompt_for(question) {
            Ok((neighbors, prompt)) => {
                trace.neighbors = neighbors;
                trace.prompt = Some(prompt.clone());
                prompt
            }
            Err(outcome) => {
                trace.outcome = outcome;
                return trace;
            }
        };
        let completion = match generate(&prompt, &self.llm, self.backend.as_ref()) {
            Ok(c) => c,
            Err(e) => {
                trace.outcome = Outcome::error(Stage::Generation, e.kind(), &e);
                return trace;
            }
        };
        trace.completion = Some(completion.clone());
        let extracted = match extract_sparql(&completion) {
            Ok(x) => x,
            Err(e) => {
                trace.outcome = Outcome::error(Stage::Extraction, "unparseable_completion", &e);
                return trace;
            }
        };
        trace.validation = Some(validate_with(&extracted.sparql, &self.prefixes));
        let sparql = if self.add_prefixes {
            ensure_prefixes(&extracted.sparql, &self.prefixes).unwrap_or_else(|_| extracted.sparql.clone())
        } else {
            extracted.sparql.clone()
        };
        trace.extracted = Some(extracted);
        trace.executed_sparql = Some(sparql.clone());
        let executor = match (&self.executor, dry_run) {
            (Some(x), false) => x,
            _ => return trace,
        };
        trace.outcome = match executor.execute(&sparql) {
            Ok(answer) => Outcome::Answer { answer },
            Err(e) => Outcome::error(Stage::Execution, e.kind().as_str(), &e),
        };
        trace
    }

    pub fn record(&self, pair: &QaPair, dry_run: bool) -> BatchRecord {
        let trace = self.ask(&pair.question, dry_run);
        BatchRecord::from_trace(pair, trace)
    }
}

/// One line of a batch results file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub id: String,
    pub question: String,
    pub prompt_sha256: Option<String>,
    pub shot_count: usize,
    pub example_ids: Vec<String>,
    pub sparql: Option<String>,
    pub extraction_method: Option<ExtractionMethod>,
    pub validation: Option<ValidationReport>,
    pub outcome: Outcome,
}

impl BatchRecord {
    pub fn from_trace(pair: &QaPair, trace: Trace) -> Self {
        let (prompt_sha256, shot_count, example_ids) = match &trace.prompt {
            Some(p) => (Some(p.sha256()), p.shot_count, p.example_ids.clone()),
            None => (None, 0, Vec::new()),
        };
        Self {
            id: pair.id.clone(),
            question: pair.question.clone(),
            prompt_sha256,
            shot_count,
            example_ids,
            sparql: trace.executed_sparql,
            extraction_method: trace.extracted.map(|x| x.extraction_method),
            validation: trace.validation,
            outcome: trace.outcome,
        }
    }

    pub fn system_record(&self) -> SystemRecord<'_> {
        SystemRecord {
            answer: self.outcome.system_answer(),
            sparql: self.sparql.as_deref(),
            validation: self.validation.as_ref(),
        }
    }
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: malformed record: {reason}")]
    Malformed { path: PathBuf, line: usize, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BatchError + '_ {
    move |source| BatchError::Io { path: path.to_path_buf(), source }
}

/// Read a results file. A final line without a trailing newline that does
/// not parse is treated as an interrupted write and dropped.
pub fn read_records(path: &Path) -> Result<Vec<BatchRecord>, BatchError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<BatchRecord>(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() && !complete => {
                log::warn!("{}: dropping truncated last line", path.display());
            }
            Err(e) => {
                return Err(BatchError::Malformed { path: path.to_path_buf(), line: i + 1, reason: e.to_string() })
            }
        }
    }
    Ok(out)
}

/// Records keyed by id; later duplicates win.
pub fn records_by_id(records: &[BatchRecord]) -> BTreeMap<&str, &BatchRecord> {
    records.iter().map(|r| (r.id.as_str(), r)).collect()
}

fn write_sorted(path: &Path, records: &BTreeMap<String, BatchRecord>) -> Result<(), BatchError> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let file = File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = BufWriter::new(file);
        for r in records.values() {
            let line = serde_json::to_string(r).expect("record serializes");
            writeln!(w, "{line}").map_err(io_err(&tmp))?;
        }
        w.flush().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

#[derive(Debug, Clone, Copy)]
pub struct BatchOptions {
    pub resume: bool,
    pub dry_run: bool,
    pub exec: Execution,
    /// Questions processed between appends to the output file.
    pub chunk_size: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self { resume: false, dry_run: false, exec: Execution::Bounded(4), chunk_size: 32 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BatchSummary {
    pub total: usize,
    pub skipped: usize,
    pub processed: usize,
    pub errors: usize,
}

/// Answer every question and write one record per question to `out`,
/// sorted by id. Records are appended as chunks finish, so an interrupted
/// run can continue with `resume`.
pub fn run_batch(
    pipeline: &Pipeline,
    questions: &[QaPair],
    out: &Path,
    opts: BatchOptions,
) -> Result<BatchSummary, BatchError> {
    let mut done: BTreeMap<String, BatchRecord> = BTreeMap::new();
    if opts.resume && out.exists() {
        for r in read_records(out)? {
            done.insert(r.id.clone(), r);
        }
    }
    let wanted: std::collections::HashSet<&str> = questions.iter().map(|q| q.id.as_str()).collect();
    done.retain(|id, _| wanted.contains(id.as_str()));
    let skipped = done.len();
    // Start from a clean file holding only the kept records.
    write_sorted(out, &done)?;

    let pending: Vec<&QaPair> = questions.iter().filter(|q| !done.contains_key(&q.id)).collect();
    let mut summary = BatchSummary { total: questions.len(), skipped, ..BatchSummary::default() };
    let mut file = OpenOptions::new().append(true).open(out).map_err(io_err(out))?;
    for chunk in pending.chunks(opts.chunk_size.max(1)) {
        let records = opts.exec.map(chunk, |pair| pipeline.record(pair, opts.dry_run));
        let mut buf = String::new();
        for r in &records {
            buf.push_str(&serde_json::to_string(r).expect("record serializes"));
            buf.push('\n');
        }
        file.write_all(buf.as_bytes()).map_err(io_err(out))?;
        file.flush().map_err(io_err(out))?;
        for r in records {
            summary.processed += 1;
            if r.outcome.is_error() {
                log::warn!("{}: {:?}", r.id, r.outcome);
                summary.errors += 1;
            }
            done.insert(r.id.clone(), r);
        }
    }
    drop(file);
    write_sorted(out, &done)?;
    Ok(summary)
}

/// Fill gold answers by executing each pair's gold query. Pairs whose query
/// fails keep no gold answers and are reported as unlabelled.
pub fn execute_gold(pairs: &[QaPair], executor: &dyn QueryExecutor, exec: Execution) -> Vec<QaPair> {
    exec.map(pairs, |p| {
        let mut p = p.clone();
        match executor.execute(&p.sparql) {
            Ok(a) => p.gold_answers = Some(a),
            Err(e) => {
                log::warn!("gold query for {} failed: {e}", p.id);
                p.gold_answers = None;
            }
        }
        p
    })
}
