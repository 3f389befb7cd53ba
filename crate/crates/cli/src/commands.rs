use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use serde_json::json;

use sparqa_core::answer::AnswerSet;
use sparqa_core::endpoint::SparqlEndpoint;
use sparqa_core::evaluation::{evaluate_run, render_tables, ErrorCategory, RunReport};
use sparqa_core::pipeline::{execute_gold, read_records, run_batch, BatchOptions, Outcome, Pipeline, Trace};
use sparqa_core::retrieval::{build_index, EmbeddingIndex};
use sparqa_core::sparql::{validate_with, ValidationReport};
use sparqa_core::{Execution, Normalization};

use crate::config::FileConfig;
use crate::settings::{self, Recorder};
use crate::{
    AskArgs, BatchArgs, DataArgs, EmbedderArgs, EndpointArgs, EvaluateArgs, IndexArgs, LintArgs, LlmArgs, PromptArgs,
    ReportArgs,
};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CmdResult = Result<ExitCode, CliError>;

trait OrExit<T> {
    /// Bad input or configuration: exit 1.
    fn usage(self) -> Result<T, CliError>;
    /// A stage failed while running: exit 2.
    fn failed(self) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn usage(self) -> Result<T, CliError> {
        self.map_err(|e| CliError { code: 1, error: e.into() })
    }

    fn failed(self) -> Result<T, CliError> {
        self.map_err(|e| CliError { code: 2, error: e.into() })
    }
}

fn execution(concurrency: usize) -> Execution {
    if concurrency <= 1 {
        Execution::Sequential
    } else {
        Execution::Bounded(concurrency)
    }
}

pub fn index(args: &IndexArgs, file: &FileConfig) -> CmdResult {
    let train_path = settings::train_path(&args.data, file).usage()?;
    let out = settings::index_path(&args.data, file).usage()?;
    let fields = settings::field_map(args.data.fields.as_deref(), file).usage()?;
    let train =
        settings::load_corpus(&train_path, sparqa_core::Split::Train, &fields, Normalization::Lenient).usage()?;
    let embedder = settings::embedder(&args.embedder, file).usage()?;
    // An explicit concurrency bounds the workers (useful for a remote
    // embedder); otherwise every core is used.
    let exec = match args.concurrency.or(file.run.concurrency) {
        Some(_) => execution(settings::concurrency(args.concurrency, file).usage()?),
        None => Execution::default(),
    };
    let index = build_index(&train, embedder.as_ref(), exec).failed()?;
    index.save(&out).with_context(|| format!("writing {}", out.display())).failed()?;
    println!(
        "indexed {} questions with {} (dim {}) -> {}",
        index.len(),
        index.provider_id(),
        index.dim(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

struct Built {
    pipeline: Pipeline,
    recorder: Option<Recorder>,
    concurrency: usize,
}

#[allow(clippy::too_many_arguments)]
fn build_pipeline(
    data: &DataArgs,
    embedder: &EmbedderArgs,
    prompt: &PromptArgs,
    llm: &LlmArgs,
    endpoint: &EndpointArgs,
    concurrency: Option<usize>,
    file: &FileConfig,
) -> Result<Built, CliError> {
    let train_path = settings::train_path(data, file).usage()?;
    let index_path = settings::index_path(data, file).usage()?;
    let fields = settings::field_map(data.fields.as_deref(), file).usage()?;
    let train =
        settings::load_corpus(&train_path, sparqa_core::Split::Train, &fields, Normalization::Lenient).usage()?;
    let embedder = settings::embedder(embedder, file).usage()?;
    let index = EmbeddingIndex::load(&index_path, embedder.as_ref())
        .with_context(|| format!("loading index {} (run `sparqa index` first)", index_path.display()))
        .usage()?;
    let template = settings::template(prompt, file).usage()?;
    let prefixes = settings::prefixes(prompt.prefixes.as_deref(), file).usage()?;
    let llm_cfg = settings::llm_config(llm, file).usage()?;
    let (backend, recorder) = settings::backend(llm, file, &llm_cfg).usage()?;
    let endpoint_cfg = settings::endpoint_config(endpoint, file).usage()?;
    let (shots, top_n) = settings::shots_and_top_n(prompt, file);
    let pipeline = Pipeline {
        train,
        index,
        embedder,
        template,
        backend,
        llm: llm_cfg,
        executor: Some(Box::new(SparqlEndpoint::new(endpoint_cfg))),
        prefixes,
        top_n,
        shots,
        add_prefixes: prompt.add_prefixes || file.run.add_prefixes.unwrap_or(false),
    };
    pipeline.check().usage()?;
    Ok(Built { pipeline, recorder, concurrency: settings::concurrency(concurrency, file).usage()? })
}

fn finish_recording(recorder: &Option<Recorder>, llm: &LlmArgs) -> Result<(), CliError> {
    if let (Some(r), Some(path)) = (recorder, &llm.record) {
        settings::save_recording(r, path).failed()?;
    }
    Ok(())
}

fn format_answer(answer: &AnswerSet) -> String {
    let mut out = String::new();
    match answer {
        AnswerSet::Boolean { truth } => {
            let _ = writeln!(out, "{truth}");
        }
        AnswerSet::Bindings { vars, rows } => {
            let head: Vec<String> = vars.iter().map(|v| format!("?{v}")).collect();
            let _ = writeln!(out, "{}", head.join("\t"));
            for row in rows {
                let cells: Vec<&str> = row.iter().map(|c| c.as_deref().unwrap_or("UNBOUND")).collect();
                let _ = writeln!(out, "{}", cells.join("\t"));
            }
        }
    }
    out
}

fn format_validation(report: &ValidationReport) -> String {
    let mut out = String::new();
    if report.ok && report.warnings.is_empty() {
        out.push_str("ok\n");
    }
    for i in &report.issues {
        let _ = writeln!(out, "error {} at {}: {}", i.code, i.offset, i.message);
    }
    for w in &report.warnings {
        let _ = writeln!(out, "warning {} at {}: {}", w.code, w.offset, w.message);
    }
    out
}

fn trace_json(question: &str, trace: &Trace) -> serde_json::Value {
    json!({
        "question": question,
        "neighbors": trace.neighbors,
        "prompt": trace.prompt.as_ref().map(|p| &p.text),
        "prompt_sha256": trace.prompt.as_ref().map(|p| p.sha256()),
        "example_ids": trace.prompt.as_ref().map(|p| &p.example_ids),
        "completion": trace.completion.as_ref().map(|c| &c.text),
        "sparql": trace.executed_sparql,
        "extraction_method": trace.extracted.as_ref().map(|x| x.extraction_method),
        "validation": trace.validation,
        "outcome": trace.outcome,
    })
}

pub fn ask(args: &AskArgs, file: &FileConfig) -> CmdResult {
    if args.question.trim().is_empty() {
        return Err(anyhow!("question is empty")).usage();
    }
    let built = build_pipeline(&args.data, &args.embedder, &args.prompt, &args.llm, &args.endpoint, None, file)?;
    let trace = built.pipeline.ask(&args.question, args.dry_run);
    finish_recording(&built.recorder, &args.llm)?;

    if args.json {
        println!("{}", serde_json::to_string_pretty(&trace_json(&args.question, &trace)).expect("trace serializes"));
    } else {
        let mut out = String::new();
        out.push_str("== Retrieved examples\n");
        for (rank, n) in trace.neighbors.iter().enumerate() {
            let _ = writeln!(out, "{:>2}. {}  {:.4}", rank + 1, n.pair_id, n.score);
        }
        if let Some(p) = &trace.prompt {
            let _ = write!(out, "== Prompt ({} shot, sha256 {})\n{}", p.shot_count, p.sha256(), p.text);
        }
        if let Some(c) = &trace.completion {
            let _ = writeln!(out, "== Completion ({})\n{}", c.backend_id, c.text.trim_end());
        }
        if let (Some(x), Some(sparql)) = (&trace.extracted, &trace.executed_sparql) {
            let method = serde_json::to_value(x.extraction_method).expect("method serializes");
            let _ = writeln!(out, "== SPARQL ({})\n{sparql}", method.as_str().unwrap_or_default());
        }
        if let Some(v) = &trace.validation {
            let _ = write!(out, "== Validation\n{}", format_validation(v));
        }
        match &trace.outcome {
            Outcome::Answer { answer } => {
                let _ = write!(out, "== Answer ({} rows)\n{}", answer.len(), format_answer(answer));
            }
            Outcome::NotExecuted => out.push_str("== Answer\n(dry run: query not executed)\n"),
            Outcome::Error { .. } => {}
        }
        print!("{out}");
    }
    match trace.outcome {
        Outcome::Error { stage, kind, message } => {
            Err(CliError { code: 2, error: anyhow!("{stage} stage failed ({kind}): {message}") })
        }
        _ => Ok(ExitCode::SUCCESS),
    }
}

/// `results.jsonl` with 3 shots becomes `results.3shot.jsonl`.
pub fn sweep_path(out: &Path, shots: usize) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("jsonl");
    out.with_file_name(format!("{stem}.{shots}shot.{ext}"))
}

pub fn batch(args: &BatchArgs, file: &FileConfig) -> CmdResult {
    let mut built =
        build_pipeline(&args.data, &args.embedder, &args.prompt, &args.llm, &args.endpoint, args.concurrency, file)?;
    let input = args
        .input
        .clone()
        .or_else(|| settings::split_path(args.split, file))
        .ok_or_else(|| anyhow!("no input for split {}: pass --input or set paths.{}", args.split, args.split))
        .usage()?;
    let fields = settings::field_map(args.data.fields.as_deref(), file).usage()?;
    let mode = settings::normalization(&args.endpoint, file).usage()?;
    let questions = settings::load_corpus(&input, args.split, &fields, mode).usage()?;

    let runs: Vec<(usize, PathBuf)> = if args.sweep.is_empty() {
        vec![(built.pipeline.shots, args.out.clone())]
    } else {
        args.sweep.iter().map(|&n| (n, sweep_path(&args.out, n))).collect()
    };
    let opts = BatchOptions {
        resume: args.resume,
        dry_run: args.dry_run,
        exec: execution(built.concurrency),
        ..BatchOptions::default()
    };
    for (shots, out) in runs {
        built.pipeline.shots = shots;
        built.pipeline.check().usage()?;
        let summary = run_batch(&built.pipeline, &questions.pairs, &out, opts).failed()?;
        println!(
            "{}: {} questions, {} shot, {} answered now, {} kept from previous run, {} with errors",
            out.display(),
            summary.total,
            shots,
            summary.processed,
            summary.skipped,
            summary.errors
        );
    }
    finish_recording(&built.recorder, &args.llm)?;
    Ok(ExitCode::SUCCESS)
}

pub fn evaluate(args: &EvaluateArgs, file: &FileConfig) -> CmdResult {
    let fields = settings::field_map(args.fields.as_deref(), file).usage()?;
    let mode = settings::normalization(&args.endpoint, file).usage()?;
    let mut gold = settings::load_corpus(&args.gold, args.split, &fields, mode).usage()?;
    if args.gold_source == crate::GoldSource::Execute {
        let cfg = settings::endpoint_config(&args.endpoint, file).usage()?;
        let workers = settings::concurrency(args.concurrency, file).usage()?;
        gold.pairs = execute_gold(&gold.pairs, &SparqlEndpoint::new(cfg), execution(workers));
    }
    let records = read_records(&args.system).usage()?;
    let by_id: BTreeMap<&str, _> = records.iter().map(|r| (r.id.as_str(), r.system_record())).collect();
    let unknown = by_id.keys().filter(|id| gold.get(id).is_none()).count();
    if unknown > 0 {
        log::warn!("{unknown} system records have no gold question and are ignored");
    }
    let dry = records.iter().filter(|r| r.outcome == Outcome::NotExecuted).count();
    if dry > 0 {
        log::warn!("{dry} system records come from a dry run and are scored as failures");
    }
    let shot_count = records.iter().map(|r| r.shot_count).max().unwrap_or(0);
    let report = evaluate_run(&gold.pairs, &by_id, shot_count, args.split).usage()?;

    if let Some(out) = &args.out {
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        std::fs::write(out, text).with_context(|| format!("writing {}", out.display())).failed()?;
    }
    print!("{}", render_tables(std::slice::from_ref(&report)));
    let mut methods: BTreeMap<String, usize> = BTreeMap::new();
    for r in &records {
        if let Some(m) = r.extraction_method {
            let name = serde_json::to_value(m).expect("method serializes");
            *methods.entry(name.as_str().unwrap_or_default().to_string()).or_default() += 1;
        }
    }
    let methods: Vec<String> = methods.iter().map(|(k, v)| format!("{k} {v}")).collect();
    println!("\nextraction: {}", methods.join(", "));
    if !report.unlabeled.is_empty() {
        println!("unlabeled (no gold answers, not averaged): {}", report.unlabeled.len());
    }
    if !report.missing_system.is_empty() {
        println!("missing system records (scored as failures): {}", report.missing_system.len());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn lint(args: &LintArgs, file: &FileConfig) -> CmdResult {
    let table = settings::prefixes(args.prefixes.as_deref(), file).usage()?;
    let mut inputs: Vec<(String, String)> = Vec::new();
    for path in &args.files {
        let text = if path.as_os_str() == "-" {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).context("reading stdin").usage()?;
            s
        } else {
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).usage()?
        };
        inputs.push((path.display().to_string(), text));
    }
    for (i, q) in args.queries.iter().enumerate() {
        inputs.push((format!("query {}", i + 1), q.clone()));
    }
    if let Some(path) = &args.corpus {
        let fields = settings::field_map(args.fields.as_deref(), file).usage()?;
        let corpus = settings::load_corpus(path, sparqa_core::Split::Train, &fields, Normalization::Lenient).usage()?;
        inputs.extend(corpus.pairs.into_iter().map(|p| (p.id, p.sparql)));
    }
    if inputs.is_empty() {
        return Err(anyhow!("nothing to lint: pass files, --query or --corpus")).usage();
    }
    let reports: Vec<(String, ValidationReport)> = inputs
        .into_iter()
        .map(|(label, text)| {
            let r = validate_with(&text, &table);
            (label, r)
        })
        .collect();
    if args.json {
        let doc: Vec<_> = reports.iter().map(|(label, r)| json!({ "input": label, "report": r })).collect();
        println!("{}", serde_json::to_string_pretty(&doc).expect("reports serialize"));
    } else {
        for (label, r) in &reports {
            for line in format_validation(r).lines() {
                println!("{label}: {line}");
            }
        }
    }
    let failing = reports.iter().filter(|(_, r)| !r.ok).count();
    if failing > 0 {
        eprintln!("{failing} of {} queries have errors", reports.len());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

pub fn report(args: &ReportArgs) -> CmdResult {
    let mut reports = Vec::new();
    for path in &args.reports {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).usage()?;
        let r: RunReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).usage()?;
        reports.push(r);
    }
    print!("{}", render_tables(&reports));
    if args.details {
        for r in &reports {
            println!();
            for q in r.per_question.iter().filter(|q| q.category != ErrorCategory::Correct) {
                println!(
                    "{} {}-shot {}  f1 {:.3}  {}",
                    r.split,
                    r.shot_count,
                    q.score.question_id,
                    q.score.f1,
                    q.category.as_str()
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
