//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use sparqa_core::corpus::{Corpus, QaPair, Split};
use sparqa_core::evaluation::{score_question, QuestionScore, SystemAnswer};
use sparqa_core::fixtures::sciqa_like;
use sparqa_core::retrieval::Neighbor;
use sparqa_core::sparql::{tokenize, Token, TokenKind};
use sparqa_core::AnswerSet;

// ---------------------------------------------------------------------------
// Trigram embedding oracle, written from the published description rather
// than the library code: lowercase, collapse whitespace, pad with one space
// each side, hash every char trigram with FNV-1a/64, count per bucket.

pub fn oracle_fnv(bytes: &[u8]) -> u64 {
    let mut h: u64 = 14695981039346656037;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(1099511628211);
    }
    h
}

pub fn oracle_counts(text: &str, dim: usize) -> Vec<u64> {
    let words: Vec<String> = text.split_whitespace().map(|w| w.to_lowercase()).collect();
    let padded = format!(" {} ", words.join(" "));
    let chars: Vec<char> = padded.chars().collect();
    let mut counts = vec![0u64; dim];
    for i in 0..chars.len().saturating_sub(2) {
        let tri: String = chars[i..i + 3].iter().collect();
        counts[(oracle_fnv(tri.as_bytes()) % dim as u64) as usize] += 1;
    }
    counts
}

fn dot_int(a: &[u64], b: &[u64]) -> u128 {
    a.iter().zip(b).map(|(x, y)| (*x as u128) * (*y as u128)).sum()
}

/// Cosine as an exact fraction dot / sqrt(na * nb), kept in integers so
/// that ranking comparisons are exact.
#[derive(Debug, Clone, Copy)]
pub struct ExactCosine {
    pub dot: u128,
    pub norms: u128,
}

impl ExactCosine {
    pub fn new(a: &[u64], b: &[u64]) -> Self {
        Self { dot: dot_int(a, b), norms: dot_int(a, a) * dot_int(b, b) }
    }

    pub fn value(&self) -> f64 {
        self.dot as f64 / (self.norms as f64).sqrt()
    }

    /// Compare dot1/sqrt(n1) with dot2/sqrt(n2) via dot1^2 * n2 vs dot2^2 * n1.
    pub fn cmp(&self, other: &Self) -> Ordering {
        let side = |d: u128, n: u128| d.checked_mul(d).and_then(|x| x.checked_mul(n)).expect("fits in u128");
        side(self.dot, other.norms).cmp(&side(other.dot, self.norms))
    }
}

/// Brute-force ranking: every entry scored, sorted by exact cosine
/// descending, ties by ascending position.
pub fn brute_force_top_n(index: &[Vec<u64>], query: &[u64], n: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, ExactCosine)> = index.iter().map(|v| ExactCosine::new(query, v)).enumerate().collect();
    all.sort_by(|(pa, a), (pb, b)| b.cmp(a).then(pa.cmp(pb)));
    all.into_iter().take(n).map(|(p, c)| (p, c.value())).collect()
}

/// Compare library neighbours with the oracle ranking. Returns a message on
/// the first difference.
pub fn compare_rankings(got: &[Neighbor], want: &[(usize, f64)], tol: f64) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!("length {} != {}", got.len(), want.len()));
    }
    for (rank, (g, (pos, score))) in got.iter().zip(want).enumerate() {
        if g.position != *pos {
            return Err(format!("rank {rank}: position {} != {pos}", g.position));
        }
        if (g.score - score).abs() > tol {
            return Err(format!("rank {rank}: score {} vs {score}", g.score));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Retrieval fixture.

/// 300 training questions: 280 synthetic ones plus 20 exact repeats under
/// new ids, so the index contains genuine score ties.
pub fn retrieval_corpus() -> Corpus {
    let pairs = sciqa_like(280);
    let mut out: Vec<QaPair> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| QaPair {
            id: format!("train-{i:05}"),
            question: p.question.clone(),
            sparql: p.sparql.clone(),
            gold_answers: None,
        })
        .collect();
    for k in 0..20 {
        let src = out[k * 13].clone();
        out.push(QaPair { id: format!("dup-{k:02}"), ..src });
    }
    Corpus::new(Split::Train, out).expect("valid corpus")
}

const NOISE_WORDS: [&str; 12] =
    ["benchmark", "dataset", "model", "score", "papers", "code", "metric", "highest", "which", "list", "the", "on"];

/// Seeded random queries: copies of training questions, edited copies, and
/// bags of domain words.
pub fn random_queries(corpus: &Corpus, n: usize, seed: u64) -> Vec<String> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let base = &corpus.pairs[rng.gen_range(0..corpus.len())].question;
            match rng.gen_range(0..4) {
                0 => base.clone(),
                1 => base.to_uppercase(),
                2 => {
                    let mut words: Vec<&str> = base.split_whitespace().collect();
                    let k = rng.gen_range(0..words.len());
                    words[k] = NOISE_WORDS[rng.gen_range(0..NOISE_WORDS.len())];
                    words.join("  ")
                }
                _ => {
                    let len = rng.gen_range(1..8);
                    (0..len).map(|_| *NOISE_WORDS.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" ")
                }
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// F1 oracle: plain vectors and nested loops, no sets.

pub fn oracle_scores(gold: &AnswerSet, system: Option<&AnswerSet>) -> (f64, f64, f64) {
    fn rows(a: &AnswerSet) -> Vec<Vec<Option<String>>> {
        match a {
            AnswerSet::Boolean { truth } => vec![vec![Some(truth.to_string())]],
            AnswerSet::Bindings { rows, .. } => {
                let mut out: Vec<Vec<Option<String>>> = Vec::new();
                for r in rows {
                    if !out.contains(r) {
                        out.push(r.clone());
                    }
                }
                out
            }
        }
    }
    let g = rows(gold);
    let g_empty = matches!(gold, AnswerSet::Bindings { .. }) && g.is_empty();
    let Some(system) = system else {
        return if g_empty { (1.0, 1.0, 1.0) } else { (0.0, 0.0, 0.0) };
    };
    if std::mem::discriminant(gold) != std::mem::discriminant(system) {
        return (0.0, 0.0, 0.0);
    }
    let s = rows(system);
    match (g.is_empty(), s.is_empty()) {
        (true, true) => return (1.0, 1.0, 1.0),
        (true, false) | (false, true) => return (0.0, 0.0, 0.0),
        _ => {}
    }
    let mut hits = 0usize;
    for row in &s {
        for gold_row in &g {
            if row == gold_row {
                hits += 1;
                break;
            }
        }
    }
    let p = hits as f64 / s.len() as f64;
    let r = hits as f64 / g.len() as f64;
    let f = if hits == 0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// A random bindings set over `vars` drawing values from a small pool so
/// that overlaps are common.
pub fn random_bindings(rng: &mut StdRng, vars: &[&str], max_rows: usize) -> AnswerSet {
    let n = rng.gen_range(0..=max_rows);
    let rows = (0..n).map(|_| {
        vars.iter()
            .map(|_| match rng.gen_range(0..10) {
                0 => None,
                v => Some(format!("v{v}")),
            })
            .collect::<Vec<_>>()
    });
    AnswerSet::bindings(vars.iter().map(|v| v.to_string()).collect(), rows).unwrap()
}

pub fn random_answer(rng: &mut StdRng) -> AnswerSet {
    if rng.gen_range(0..10) == 0 {
        AnswerSet::Boolean { truth: rng.gen() }
    } else {
        let vars: &[&str] = if rng.gen() { &["x"] } else { &["x", "y"] };
        random_bindings(rng, vars, 6)
    }
}

// ---------------------------------------------------------------------------
// Null accounting fixture: 60 questions; 14 gold-null, 23 system-null of
// which 14 coincide with the gold-nulls, 7 rejected for syntax.

pub fn crafted_null_scores() -> Vec<QuestionScore> {
    let bindings = AnswerSet::column("x", ["a", "b"]);
    let empty = AnswerSet::empty(vec!["x".into()]);
    let mut scores = Vec::new();
    for i in 0..60 {
        let gold = if i < 14 { &empty } else { &bindings };
        let system = match i {
            // Gold-null and system-null; 4 of them via syntax rejections.
            0..=3 => SystemAnswer::Failed { syntax_rejected: true },
            4..=13 => SystemAnswer::Answer(&empty),
            // System-null only; 3 more syntax rejections.
            14..=16 => SystemAnswer::Failed { syntax_rejected: true },
            17..=22 => SystemAnswer::Answer(&empty),
            _ => SystemAnswer::Answer(&bindings),
        };
        scores.push(score_question(&format!("q{i:02}"), gold, system));
    }
    scores
}

// ---------------------------------------------------------------------------
// Validator corpus and mutations.

pub fn gold_queries() -> Vec<String> {
    include_str!("../data/gold_queries.rq")
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn punct_positions(tokens: &[Token], p: &str) -> Vec<usize> {
    tokens.iter().enumerate().filter(|(_, t)| t.kind == TokenKind::Punct && t.text == p).map(|(i, _)| i).collect()
}

fn is_triple_start(t: &Token) -> bool {
    matches!(t.kind, TokenKind::Variable | TokenKind::Iri | TokenKind::PrefixedName)
}

/// Remove one `}` chosen by `rng`.
pub fn delete_brace(query: &str, rng: &mut StdRng) -> String {
    let tokens = tokenize(query).expect("gold query lexes");
    let at = *punct_positions(&tokens, "}").choose(rng).expect("query has a brace");
    let off = tokens[at].offset;
    format!("{}{}", &query[..off], &query[off + 1..])
}

/// Insert `;` immediately before one `}` chosen by `rng`.
pub fn inject_semicolon(query: &str, rng: &mut StdRng) -> String {
    let tokens = tokenize(query).expect("gold query lexes");
    let at = *punct_positions(&tokens, "}").choose(rng).expect("query has a brace");
    let off = tokens[at].offset;
    format!("{}; {}", &query[..off], &query[off..])
}

/// Remove one `.` that separates two triples (the next token starts a
/// subject). Dots before `}` or a keyword are optional in the grammar, so
/// deleting them is not a defect.
pub fn delete_dot(query: &str, rng: &mut StdRng) -> Option<String> {
    let tokens = tokenize(query).expect("gold query lexes");
    let candidates: Vec<usize> =
        punct_positions(&tokens, ".").into_iter().filter(|&i| tokens.get(i + 1).is_some_and(is_triple_start)).collect();
    let at = *candidates.choose(rng)?;
    let off = tokens[at].offset;
    Some(format!("{}{}", &query[..off], &query[off + 1..]))
}

pub fn rows_of(set: &AnswerSet) -> BTreeSet<Vec<Option<String>>> {
    match set {
        AnswerSet::Bindings { rows, .. } => rows.clone(),
        AnswerSet::Boolean { truth } => [vec![Some(truth.to_string())]].into_iter().collect(),
    }
}

// ---------------------------------------------------------------------------
// Prompt golden fixture: five training pairs and a fixed retrieval result
// listing them in an order different from corpus order.

pub fn prompt_corpus() -> Corpus {
    let pair =
        |id: &str, q: &str, s: &str| QaPair { id: id.into(), question: q.into(), sparql: s.into(), gold_answers: None };
    Corpus::new(
        Split::Train,
        vec![
            pair(
                "t0",
                "What models are being evaluated on the BoolQ dataset?",
                "SELECT DISTINCT ?model ?model_lbl\nWHERE {\n  ?dataset a orkgc:Dataset;\n    rdfs:label ?dataset_lbl.\n  FILTER (str(?dataset_lbl) = \"BoolQ\")\n  ?benchmark orkgp:HAS_DATASET ?dataset.\n  ?cont orkgp:HAS_BENCHMARK ?benchmark;\n    orkgp:HAS_MODEL ?model.\n  ?model rdfs:label ?model_lbl.\n}",
            ),
            pair(
                "t1",
                "Can you list the models that have been evaluated on the Jacquard dataset?",
                "SELECT DISTINCT ?model ?model_lbl WHERE {\n  ?dataset a orkgc:Dataset; rdfs:label ?dataset_lbl.\n  FILTER (str(?dataset_lbl) = \" Jacquard dataset\")\n  ?benchmark orkgp:HAS_DATASET ?dataset.\n  ?cont orkgp:HAS_BENCHMARK ?benchmark; orkgp:HAS_MODEL ?model.\n  ?model rdfs:label ?model_lbl.\n}",
            ),
            pair(
                "t2",
                "Is there a benchmark   that uses the MNIST dataset?",
                "ASK {\\n ?dataset a orkgc:Dataset; rdfs:label \"MNIST\".\\n ?benchmark orkgp:HAS_DATASET ?dataset.\\n}",
            ),
            pair(
                "t3",
                "What is the top benchmark score and its metric on the CoQA dataset?",
                "SELECT DISTINCT ?metric ?metric_lbl (MAX(?value) AS ?score)\nWHERE {\n\t?dataset a orkgc:Dataset; rdfs:label ?dataset_lbl.\n\tFILTER (str(?dataset_lbl) = \"CoQA\")\n\t?benchmark orkgp:HAS_DATASET ?dataset; orkgp:HAS_EVALUATION ?eval.\n\t?eval orkgp:HAS_VALUE ?value; orkgp:HAS_METRIC ?metric.\n\t?metric rdfs:label ?metric_lbl.\n}\nGROUP BY ?metric ?metric_lbl",
            ),
            pair(
                "t4",
                "Where can I find code references in papers that have used the BERT model?",
                "SELECT DISTINCT ?code WHERE { ?model a orkgc:Model; rdfs:label \"BERT\". ?cont orkgp:HAS_MODEL ?model; orkgp:HAS_SOURCE_CODE ?code. }",
            ),
        ],
    )
    .expect("valid corpus")
}

pub const PROMPT_TEST_QUESTION: &str = "What models are being evaluated on the TriviaQA dataset?";

pub fn prompt_neighbors() -> Vec<Neighbor> {
    [(0usize, 0.91), (1, 0.85), (3, 0.52), (2, 0.40), (4, 0.12)]
        .into_iter()
        .map(|(position, score)| Neighbor { pair_id: format!("t{position}"), score, position })
        .collect()
}
