//! Acceptance checks A1-A7, one PASS/FAIL line each. A8 needs a live
//! completion server and SPARQL endpoint and is ignored by default:
//!
//! ```text
//! SPARQA_LLM_URL=http://host:8000/v1/completions \
//! SPARQA_TRAIN=train.json SPARQA_DEV=dev.json \
//! cargo test -p sparqa-core --test acceptance -- --ignored --nocapture
//! ```

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::*;
use sparqa_core::endpoint::{EndpointConfig, SparqlEndpoint};
use sparqa_core::evaluation::{evaluate_run, null_accounting, score_question, ErrorCategory, RunReport, SystemAnswer};
use sparqa_core::fixtures::{memorization_fixture, MemorizationFixture};
use sparqa_core::generation::{EchoNearestBackend, LlmConfig};
use sparqa_core::pipeline::{read_records, records_by_id, run_batch, BatchOptions, Pipeline};
use sparqa_core::prompt::{build_prompt, render_examples, select_examples, PromptTemplate};
use sparqa_core::retrieval::{build_index, Embedder, HashedTrigramEmbedder};
use sparqa_core::sparql::{clean, validate, IssueCode, PrefixTable};
use sparqa_core::{AnswerSet, Execution, Split};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn a1_retrieval_oracle() -> Check {
    let corpus = retrieval_corpus();
    let embedder = HashedTrigramEmbedder::default();
    let queries = random_queries(&corpus, 200, 0xA1);

    // Timed: index build and every query, top-5 and the full ranking.
    let start = Instant::now();
    let index = build_index(&corpus, &embedder, Execution::default()).map_err(|e| e.to_string())?;
    let mut results = Vec::with_capacity(queries.len());
    for q in &queries {
        let top5 = index.top_n(&embedder, q, 5).map_err(|e| e.to_string())?;
        let all = index.top_n(&embedder, q, corpus.len()).map_err(|e| e.to_string())?;
        results.push((top5, all));
    }
    let elapsed = start.elapsed();

    let oracle_index: Vec<Vec<u64>> = corpus.iter().map(|p| oracle_counts(&p.question, embedder.dim())).collect();
    let mut ties = 0;
    for (q, (top5, all)) in queries.iter().zip(&results) {
        let want = brute_force_top_n(&oracle_index, &oracle_counts(q, embedder.dim()), corpus.len());
        ties += want.windows(2).filter(|w| w[0].1 == w[1].1).count();
        compare_rankings(top5, &want[..5], 1e-12).map_err(|e| format!("query {q:?}, top 5: {e}"))?;
        compare_rankings(all, &want, 1e-12).map_err(|e| format!("query {q:?}, full ranking: {e}"))?;
    }
    ensure(ties > 0, "fixture produced no ties; tie-breaking untested")?;
    ensure(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!("300 entries x 200 queries match, {ties} tied pairs, retrieval {elapsed:.2?}"))
}

fn a2_prompt_golden() -> Check {
    let train = prompt_corpus();
    let neighbors = prompt_neighbors();
    let golden = [
        (1, include_str!("golden/prompt_1shot.txt")),
        (3, include_str!("golden/prompt_3shot.txt")),
        (5, include_str!("golden/prompt_5shot.txt")),
    ];
    for (shots, want) in golden {
        let blocks = select_examples(&train, &neighbors, shots).map_err(|e| e.to_string())?;
        let rendered = render_examples(&blocks).map_err(|e| e.to_string())?;
        let prompt =
            build_prompt(&PromptTemplate::canonical(), &rendered, PROMPT_TEST_QUESTION).map_err(|e| e.to_string())?;
        if prompt.text != want {
            let line = prompt.text.lines().zip(want.lines()).position(|(a, b)| a != b);
            return Err(format!("{shots}-shot prompt differs from golden (first differing line {line:?})"));
        }
    }
    Ok("1-, 3- and 5-shot prompts byte-equal".into())
}

/// Generated SPARQL-ish text with the literals it contains, in order.
fn generated_text(rng: &mut StdRng) -> (String, Vec<String>) {
    const CODE: [&str; 14] =
        ["SELECT", "?x", "{", "}", ".", ";", "orkgp:P31", "FILTER(", ")", "=", "a", "rdfs:label", "\\n", "\\t"];
    const SPACE: [&str; 6] = [" ", "   ", "\n", "\t", " \n  ", "\r\n"];
    const BODY: [&str; 9] = ["Jacquard", " ", "  ", "\n", "\t", "dataset", "\\n", "{;.}", "é"];
    let mut text = String::new();
    let mut literals = Vec::new();
    for _ in 0..rng.gen_range(1..20) {
        match rng.gen_range(0..3) {
            0 => text.push_str(CODE[rng.gen_range(0..CODE.len())]),
            1 => text.push_str(SPACE[rng.gen_range(0..SPACE.len())]),
            _ => {
                let quote = if rng.gen() { '"' } else { '\'' };
                let body: String = (0..rng.gen_range(0..6)).map(|_| BODY[rng.gen_range(0..BODY.len())]).collect();
                let lit = format!("{quote}{body}{quote}");
                text.push_str(&lit);
                literals.push(lit);
            }
        }
    }
    (text, literals)
}

/// Literals in `text`, found with a scanner independent of the library.
fn scan_literals(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\\' {
            chars.next();
            continue;
        }
        if c == '"' || c == '\'' {
            let mut lit = String::from(c);
            while let Some(d) = chars.next() {
                lit.push(d);
                if d == '\\' {
                    if let Some(e) = chars.next() {
                        lit.push(e);
                    }
                } else if d == c {
                    break;
                }
            }
            out.push(lit);
        }
    }
    out
}

fn a3_cleaner_properties() -> Check {
    let mut rng = StdRng::seed_from_u64(0xA3);
    for i in 0..1000 {
        let (text, literals) = generated_text(&mut rng);
        let once = clean(&text);
        if clean(&once) != once {
            return Err(format!("case {i}: not idempotent on {text:?}"));
        }
        if scan_literals(&once) != literals {
            return Err(format!("case {i}: literal bytes changed in {text:?} -> {once:?}"));
        }
    }
    let jacquard = "SELECT ?m WHERE {\n  ?d rdfs:label ?l.\n  FILTER (str(?l) = \" Jacquard dataset\")\n}";
    let cleaned = clean(jacquard);
    ensure(cleaned.contains("\" Jacquard dataset\""), format!("leading space lost: {cleaned}"))?;
    Ok("1000 generated strings idempotent with literals intact; leading-space literal kept".into())
}

fn a4_validator_mutations() -> Check {
    let gold = gold_queries();
    ensure(gold.len() == 50, format!("expected 50 gold queries, found {}", gold.len()))?;
    for q in &gold {
        let r = validate(q);
        ensure(r.issues.is_empty(), format!("false positive {:?} on {q}", r.hard_codes()))?;
    }
    let mut rng = StdRng::seed_from_u64(0xA4);
    let (mut braces, mut semis, mut dots) = (0, 0, 0);
    for q in &gold {
        let m = delete_brace(q, &mut rng);
        let r = validate(&m);
        ensure(!r.ok && r.has(IssueCode::UnbalancedBrace), format!("missed deleted brace: {m}"))?;
        braces += 1;

        let m = inject_semicolon(q, &mut rng);
        let r = validate(&m);
        ensure(!r.ok && r.has(IssueCode::DanglingSemicolon), format!("missed injected semicolon: {m}"))?;
        semis += 1;

        let m = delete_dot(q, &mut rng).ok_or_else(|| format!("no separating dot in {q}"))?;
        let r = validate(&m);
        ensure(!r.issues.is_empty() || !r.warnings.is_empty(), format!("no finding for deleted dot: {m}"))?;
        dots += 1;
    }
    Ok(format!(
        "0/50 false positives; flagged {braces}/50 deleted braces, {semis}/50 injected semicolons, {dots}/50 deleted dots"
    ))
}

fn memorization_run(fx: &MemorizationFixture, dir: &std::path::Path) -> Result<RunReport, String> {
    let server = fx.endpoint.clone().serve().map_err(|e| e.to_string())?;
    let embedder = HashedTrigramEmbedder::default();
    let index = build_index(&fx.train, &embedder, Execution::default()).map_err(|e| e.to_string())?;
    let pipeline = Pipeline {
        train: fx.train.clone(),
        index,
        embedder: Box::new(embedder),
        template: PromptTemplate::canonical(),
        backend: Box::new(EchoNearestBackend),
        llm: LlmConfig::default(),
        executor: Some(Box::new(SparqlEndpoint::new(EndpointConfig::new(server.url())))),
        prefixes: PrefixTable::default(),
        top_n: 5,
        shots: 3,
        add_prefixes: false,
    };
    let out = dir.join("results.jsonl");
    let summary = run_batch(&pipeline, &fx.test.pairs, &out, BatchOptions::default()).map_err(|e| e.to_string())?;
    ensure(summary.errors == 0, format!("{} pipeline errors", summary.errors))?;
    let records = read_records(&out).map_err(|e| e.to_string())?;
    let system = records_by_id(&records).into_iter().map(|(id, r)| (id, r.system_record())).collect::<BTreeMap<_, _>>();
    evaluate_run(&fx.test.pairs, &system, 3, Split::Test).map_err(|e| e.to_string())
}

fn a5_memorization() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let clean_fx = memorization_fixture(400, 200, None);
    let report = memorization_run(&clean_fx, dir.path())?;
    ensure(report.labelled == 200, format!("{} labelled", report.labelled))?;
    ensure(report.macro_f1 == 1.0, format!("duplicate-template macro F1 = {}", report.macro_f1))?;

    let perturbed = memorization_fixture(400, 200, Some(10));
    let report_p = memorization_run(&perturbed, dir.path())?;
    ensure((report_p.macro_f1 - 0.900).abs() <= 0.001, format!("perturbed macro F1 = {}", report_p.macro_f1))?;
    for q in &report_p.per_question {
        if q.score.f1 < 1.0 {
            ensure(
                matches!(q.category, ErrorCategory::KeywordMismatch | ErrorCategory::MisunderstandingOrOther),
                format!("{} categorized {:?}", q.score.question_id, q.category),
            )?;
        }
    }
    let km = report_p.categories[&ErrorCategory::KeywordMismatch];
    Ok(format!(
        "macro F1 {:.3} on duplicates; {:.3} with {} perturbed ({km} keyword_mismatch)",
        report.macro_f1,
        report_p.macro_f1,
        perturbed.perturbed.len()
    ))
}

fn a6_f1_oracle() -> Check {
    let mut rng = StdRng::seed_from_u64(0xA6);
    for i in 0..10_000 {
        let gold = random_answer(&mut rng);
        let sys = random_answer(&mut rng);
        let failed = rng.gen_range(0..20) == 0;
        let system =
            if failed { SystemAnswer::Failed { syntax_rejected: rng.gen() } } else { SystemAnswer::Answer(&sys) };
        let got = score_question("q", &gold, system);
        let (p, r, f) = oracle_scores(&gold, (!failed).then_some(&sys));
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        ensure(
            close(got.precision, p) && close(got.recall, r) && close(got.f1, f),
            format!("pair {i}: got ({}, {}, {}) want ({p}, {r}, {f})", got.precision, got.recall, got.f1),
        )?;
    }
    let empty = AnswerSet::empty(vec!["x".into()]);
    let full = AnswerSet::column("x", ["a"]);
    let d1 = [
        (score_question("e", &empty, SystemAnswer::Answer(&empty)).f1, 1.0),
        (score_question("e", &empty, SystemAnswer::Failed { syntax_rejected: true }).f1, 1.0),
        (score_question("g", &empty, SystemAnswer::Answer(&full)).f1, 0.0),
        (score_question("s", &full, SystemAnswer::Answer(&empty)).f1, 0.0),
        (score_question("s", &full, SystemAnswer::Failed { syntax_rejected: false }).f1, 0.0),
    ];
    for (i, (got, want)) in d1.iter().enumerate() {
        ensure(got == want, format!("empty-set case {i}: {got} != {want}"))?;
    }
    Ok("10000 random pairs within 1e-12; empty/empty = 1, one-empty = 0".into())
}

fn a7_null_accounting() -> Check {
    let r = null_accounting(&crafted_null_scores());
    let got = (r.null_gold, r.null_system, r.null_both, r.null_system_syntax);
    ensure(got == (14, 23, 14, 7), format!("got {got:?}"))?;
    Ok(format!(
        "null_gold {} null_system {} null_both {} null_system_syntax {}",
        r.null_gold, r.null_system, r.null_both, r.null_system_syntax
    ))
}

/// Id, name and check for one criterion.
type Criterion = (&'static str, &'static str, fn() -> Check);

#[test]
fn acceptance_criteria() {
    let checks: [Criterion; 7] = [
        ("A1", "retrieval matches brute-force cosine", a1_retrieval_oracle),
        ("A2", "prompt golden files", a2_prompt_golden),
        ("A3", "cleaner properties", a3_cleaner_properties),
        ("A4", "validator mutation suite", a4_validator_mutations),
        ("A5", "mock memorization run", a5_memorization),
        ("A6", "F1 oracle", a6_f1_oracle),
        ("A7", "null accounting", a7_null_accounting),
    ];
    let mut failed = Vec::new();
    for (id, name, check) in checks {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("{id} PASS {name}: {detail}"),
            Err(why) => {
                println!("{id} FAIL {name}: {why}");
                failed.push(id);
            }
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}

/// Live smoke test against a real completion server and endpoint.
#[test]
#[ignore = "needs SPARQA_LLM_URL, SPARQA_TRAIN and SPARQA_DEV; endpoint defaults to ORKG"]
fn a8_live_ask() {
    use sparqa_core::corpus::load_split;
    use sparqa_core::generation::HttpBackend;
    use sparqa_core::pipeline::{Outcome, Stage};

    let var = |k: &str| std::env::var(k).unwrap_or_else(|_| panic!("{k} is not set"));
    let train = load_split(var("SPARQA_TRAIN").as_ref(), Split::Train).expect("train split");
    let dev = load_split(var("SPARQA_DEV").as_ref(), Split::Dev).expect("dev split");
    let mut llm = LlmConfig { endpoint_url: var("SPARQA_LLM_URL"), ..LlmConfig::default() };
    if let Ok(m) = std::env::var("SPARQA_LLM_MODEL") {
        llm.model_name = m;
    }
    let endpoint = std::env::var("SPARQA_ENDPOINT").map(EndpointConfig::new).unwrap_or_default();

    let start = Instant::now();
    let embedder = HashedTrigramEmbedder::default();
    let index = build_index(&train, &embedder, Execution::default()).expect("index");
    let pipeline = Pipeline {
        train,
        index,
        embedder: Box::new(embedder),
        template: PromptTemplate::canonical(),
        backend: Box::new(HttpBackend::new(&llm)),
        llm,
        executor: Some(Box::new(SparqlEndpoint::new(endpoint))),
        prefixes: PrefixTable::default(),
        top_n: 5,
        shots: 3,
        add_prefixes: false,
    };
    let question = &dev.pairs[0].question;
    let trace = pipeline.ask(question, false);
    let elapsed = start.elapsed();
    let done = trace.completion.is_some()
        && match &trace.outcome {
            Outcome::Answer { .. } => true,
            Outcome::Error { stage, .. } => matches!(stage, Stage::Extraction | Stage::Execution),
            Outcome::NotExecuted => false,
        };
    let verdict = if done && elapsed < Duration::from_secs(120) { "PASS" } else { "FAIL" };
    println!("A8 {verdict} live ask: {:?} in {elapsed:.1?}", trace.outcome);
    assert_eq!(verdict, "PASS");
}
