//! Answer-set scoring, macro aggregation, null accounting and error
//! categories.
//!
//! Scores use set overlap of normalized rows. When both sides are empty the
//! question scores 1; when exactly one is empty it scores 0. A failed system
//! execution counts as an empty system answer. Macro metrics are unweighted
//! means over every labelled question.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::{AnswerSet, Row};
use crate::corpus::{QaPair, Split};
use crate::sparql::{tokenize, TokenKind, ValidationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub question_id: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_null: bool,
    pub system_null: bool,
    pub syntax_rejected: bool,
    /// Gold and system disagree on result kind (bindings vs boolean).
    #[serde(default)]
    pub kind_mismatch: bool,
}

/// The system side of a comparison.
#[derive(Debug, Clone, Copy)]
pub enum SystemAnswer<'a> {
    Answer(&'a AnswerSet),
    /// Any failure before an answer set was obtained.
    Failed {
        syntax_rejected: bool,
    },
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Reorder `system` rows into `gold`'s variable order when both use the same
/// variable names; otherwise rows are compared positionally.
fn aligned_rows(gold_vars: &[String], sys_vars: &[String], rows: &std::collections::BTreeSet<Row>) -> Vec<Row> {
    let same_names =
        gold_vars.len() == sys_vars.len() && gold_vars != sys_vars && gold_vars.iter().all(|v| sys_vars.contains(v));
    if !same_names {
        return rows.iter().cloned().collect();
    }
    let order: Vec<usize> =
        gold_vars.iter().map(|g| sys_vars.iter().position(|s| s == g).expect("checked above")).collect();
    rows.iter().map(|row| order.iter().map(|&i| row[i].clone()).collect()).collect()
}

pub fn score_question(question_id: &str, gold: &AnswerSet, system: SystemAnswer<'_>) -> QuestionScore {
    let gold_null = gold.is_null();
    let mut score = QuestionScore {
        question_id: question_id.to_string(),
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        gold_null,
        system_null: true,
        syntax_rejected: false,
        kind_mismatch: false,
    };
    let sys = match system {
        SystemAnswer::Failed { syntax_rejected } => {
            score.syntax_rejected = syntax_rejected;
            None
        }
        SystemAnswer::Answer(a) => {
            score.system_null = a.is_null();
            Some(a)
        }
    };
    let (p, r) = match (gold, sys) {
        (_, None) if gold_null => (1.0, 1.0),
        (_, None) => (0.0, 0.0),
        (AnswerSet::Boolean { truth: g }, Some(AnswerSet::Boolean { truth: s })) => {
            if g == s {
                (1.0, 1.0)
            } else {
                (0.0, 0.0)
            }
        }
        (AnswerSet::Bindings { vars: gv, rows: gr }, Some(AnswerSet::Bindings { vars: sv, rows: sr })) => {
            match (gr.is_empty(), sr.is_empty()) {
                (true, true) => (1.0, 1.0),
                (true, false) | (false, true) => (0.0, 0.0),
                (false, false) => {
                    let sys_rows = aligned_rows(gv, sv, sr);
                    let hits = sys_rows.iter().filter(|r| gr.contains(*r)).count() as f64;
                    (hits / sr.len() as f64, hits / gr.len() as f64)
                }
            }
        }
        (_, Some(_)) => {
            score.kind_mismatch = true;
            (0.0, 0.0)
        }
    };
    score.precision = p;
    score.recall = r;
    score.f1 = f1(p, r);
    score
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no scored questions")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_question: Vec<QuestionScore>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub shot_count: usize,
    pub split: Split,
}

pub fn macro_metrics(scores: &[QuestionScore], shot_count: usize, split: Split) -> Result<EvalReport, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = scores.len() as f64;
    let mean = |f: fn(&QuestionScore) -> f64| scores.iter().map(f).sum::<f64>() / n;
    let mut per_question = scores.to_vec();
    per_question.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    Ok(EvalReport {
        macro_precision: mean(|s| s.precision),
        macro_recall: mean(|s| s.recall),
        macro_f1: mean(|s| s.f1),
        per_question,
        shot_count,
        split,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NullReport {
    pub null_gold: usize,
    pub null_system: usize,
    pub null_both: usize,
    pub null_system_syntax: usize,
    /// Questions null on both sides where the system query was rejected.
    pub null_both_syntax: usize,
}

pub fn null_accounting(scores: &[QuestionScore]) -> NullReport {
    let mut r = NullReport::default();
    for s in scores {
        r.null_gold += usize::from(s.gold_null);
        r.null_system += usize::from(s.system_null);
        r.null_both += usize::from(s.gold_null && s.system_null);
        r.null_system_syntax += usize::from(s.system_null && s.syntax_rejected);
        r.null_both_syntax += usize::from(s.gold_null && s.system_null && s.syntax_rejected);
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    Correct,
    Syntactic,
    KeywordMismatch,
    MisunderstandingOrOther,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 4] = [
        ErrorCategory::Correct,
        ErrorCategory::Syntactic,
        ErrorCategory::KeywordMismatch,
        ErrorCategory::MisunderstandingOrOther,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCategory::Correct => "correct",
            ErrorCategory::Syntactic => "syntactic",
            ErrorCategory::KeywordMismatch => "keyword_mismatch",
            ErrorCategory::MisunderstandingOrOther => "misunderstanding_or_other",
        }
    }
}

fn literal_bodies(query: &str) -> Option<Vec<String>> {
    let tokens = tokenize(query).ok()?;
    let mut out: Vec<String> = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Literal)
        .map(|t| t.literal_body().unwrap_or(&t.text).to_string())
        .collect();
    out.sort();
    Some(out)
}

fn without_whitespace(items: &[String]) -> Vec<String> {
    let mut out: Vec<String> = items.iter().map(|s| s.split_whitespace().collect()).collect();
    out.sort();
    out
}

/// True when the string literals of the two queries differ, but only in
/// whitespace.
pub fn literals_differ_only_in_whitespace(gold: &str, system: &str) -> bool {
    match (literal_bodies(gold), literal_bodies(system)) {
        (Some(g), Some(s)) => g != s && without_whitespace(&g) == without_whitespace(&s),
        _ => false,
    }
}

pub fn categorize(
    question: &QaPair,
    system_sparql: Option<&str>,
    validation: Option<&ValidationReport>,
    score: &QuestionScore,
) -> ErrorCategory {
    if score.f1 == 1.0 {
        return ErrorCategory::Correct;
    }
    if score.syntax_rejected || validation.is_some_and(|v| !v.issues.is_empty()) {
        return ErrorCategory::Syntactic;
    }
    match system_sparql {
        Some(sys) if literals_differ_only_in_whitespace(&question.sparql, sys) => ErrorCategory::KeywordMismatch,
        _ => ErrorCategory::MisunderstandingOrOther,
    }
}

/// One question's system-side data, as read from a results file.
#[derive(Debug, Clone, Copy)]
pub struct SystemRecord<'a> {
    pub answer: SystemAnswer<'a>,
    pub sparql: Option<&'a str>,
    pub validation: Option<&'a ValidationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionResult {
    #[serde(flatten)]
    pub score: QuestionScore,
    pub category: ErrorCategory,
}

/// Complete evaluation of one results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub split: Split,
    pub shot_count: usize,
    pub labelled: usize,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub nulls: NullReport,
    pub categories: BTreeMap<ErrorCategory, usize>,
    /// Ids without gold answers; counted, never averaged.
    pub unlabeled: Vec<String>,
    /// Gold questions with no system record; scored as failures.
    pub missing_system: Vec<String>,
    pub per_question: Vec<QuestionResult>,
}

/// Score every gold question against its system record (by id).
pub fn evaluate_run<'a>(
    gold: &[QaPair],
    system: &BTreeMap<&str, SystemRecord<'a>>,
    shot_count: usize,
    split: Split,
) -> Result<RunReport, EvalError> {
    let mut unlabeled = Vec::new();
    let mut missing_system = Vec::new();
    let mut results = Vec::new();
    for pair in gold {
        let Some(gold_answers) = &pair.gold_answers else {
            unlabeled.push(pair.id.clone());
            continue;
        };
        let record = system.get(pair.id.as_str()).copied().unwrap_or_else(|| {
            missing_system.push(pair.id.clone());
            SystemRecord { answer: SystemAnswer::Failed { syntax_rejected: false }, sparql: None, validation: None }
        });
        let score = score_question(&pair.id, gold_answers, record.answer);
        let category = categorize(pair, record.sparql, record.validation, &score);
        results.push(QuestionResult { score, category });
    }
    let scores: Vec<QuestionScore> = results.iter().map(|r| r.score.clone()).collect();
    let summary = macro_metrics(&scores, shot_count, split)?;
    let mut categories: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|c| (*c, 0)).collect();
    for r in &results {
        *categories.entry(r.category).or_default() += 1;
    }
    results.sort_by(|a, b| a.score.question_id.cmp(&b.score.question_id));
    unlabeled.sort();
    missing_system.sort();
    Ok(RunReport {
        split,
        shot_count,
        labelled: results.len(),
        macro_precision: summary.macro_precision,
        macro_recall: summary.macro_recall,
        macro_f1: summary.macro_f1,
        nulls: null_accounting(&scores),
        categories,
        unlabeled,
        missing_system,
        per_question: results,
    })
}

pub fn shot_label(shots: usize) -> String {
    match shots {
        1 => "One-shot".into(),
        3 => "Three-shot".into(),
        5 => "Five-shot".into(),
        n => format!("{n}-shot"),
    }
}

/// Plain-text tables: scores per split and shot count, then null counts.
pub fn render_tables(reports: &[RunReport]) -> String {
    let mut sorted: Vec<&RunReport> = reports.iter().collect();
    sorted.sort_by_key(|r| (r.split.to_string(), r.shot_count));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6} {:<11} {:>9} {:>9} {:>9} {:>9}",
        "Data", "Shot", "F1 Score", "Precision", "Recall", "Questions"
    );
    for r in &sorted {
        let _ = writeln!(
            out,
            "{:<6} {:<11} {:>9.3} {:>9.3} {:>9.3} {:>9}",
            r.split.to_string(),
            shot_label(r.shot_count),
            r.macro_f1,
            r.macro_precision,
            r.macro_recall,
            r.labelled
        );
    }
    out.push('\n');
    let _ = writeln!(out, "{:<6} {:<32} {:>6} {:>20}", "Data", "Null answers", "total", "due to syntax error");
    let mut gold_done = std::collections::BTreeSet::new();
    for r in &sorted {
        let split = r.split.to_string();
        if gold_done.insert(split.clone()) {
            let _ = writeln!(out, "{:<6} {:<32} {:>6} {:>20}", split, "gold", r.nulls.null_gold, "-");
        }
        let label = shot_label(r.shot_count).to_lowercase();
        let _ =
            writeln!(out, "{:<6} {:<32} {:>6} {:>20}", split, label, r.nulls.null_system, r.nulls.null_system_syntax);
        let _ = writeln!(
            out,
            "{:<6} {:<32} {:>6} {:>20}",
            split,
            format!("both in gold and {label}"),
            r.nulls.null_both,
            r.nulls.null_both_syntax
        );
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<6} {:<11} {:>8} {:>10} {:>17} {:>26} {:>10}",
        "Data", "Shot", "correct", "syntactic", "keyword_mismatch", "misunderstanding_or_other", "unlabeled"
    );
    for r in &sorted {
        let c = |k| r.categories.get(&k).copied().unwrap_or(0);
        let _ = writeln!(
            out,
            "{:<6} {:<11} {:>8} {:>10} {:>17} {:>26} {:>10}",
            r.split.to_string(),
            shot_label(r.shot_count),
            c(ErrorCategory::Correct),
            c(ErrorCategory::Syntactic),
            c(ErrorCategory::KeywordMismatch),
            c(ErrorCategory::MisunderstandingOrOther),
            r.unlabeled.len()
        );
    }
    out
}
