mod common;

use proptest::collection::vec;
use proptest::prelude::*;

use sparqa_core::corpus::{load_split, save_split, Corpus, QaPair, Split};
use sparqa_core::evaluation::{null_accounting, score_question, QuestionScore, SystemAnswer};
use sparqa_core::generation::extract_text;
use sparqa_core::retrieval::{build_index, HashedTrigramEmbedder};
use sparqa_core::sparql::clean;
use sparqa_core::{AnswerSet, Execution};

/// Text assembled from code tokens, whitespace and quoted literals; the
/// literals are returned alongside, in order.
fn sparql_like() -> impl Strategy<Value = (String, Vec<String>)> {
    let code =
        prop::sample::select(vec!["SELECT", "?x", "{", "}", ".", ";", "orkgp:P31", "FILTER(", ")", "\\n", "\\t", "a"]);
    let space = "[ \t\n\r]{1,4}";
    let literal = (prop::bool::ANY, "[a-zA-Z0-9 \t\n{};.é]{0,12}").prop_map(|(dq, body)| {
        let q = if dq { '"' } else { '\'' };
        format!("{q}{body}{q}")
    });
    let segment = prop_oneof![
        code.prop_map(|c| (c.to_string(), None)),
        space.prop_map(|s| (s, None)),
        literal.prop_map(|l| (l.clone(), Some(l))),
    ];
    vec(segment, 0..24).prop_map(|segs| {
        let mut text = String::new();
        let mut lits = Vec::new();
        for (s, l) in segs {
            text.push_str(&s);
            lits.extend(l);
        }
        (text, lits)
    })
}

fn literals_in(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                chars.next();
            }
            '"' | '\'' => {
                let mut lit = String::from(c);
                for d in chars.by_ref() {
                    lit.push(d);
                    if d == c {
                        break;
                    }
                }
                out.push(lit);
            }
            _ => {}
        }
    }
    out
}

fn answer_set() -> impl Strategy<Value = AnswerSet> {
    let value = prop::option::weighted(0.9, "[a-d]");
    prop_oneof![
        1 => prop::bool::ANY.prop_map(|truth| AnswerSet::Boolean { truth }),
        6 => vec(vec(value, 2), 0..6).prop_map(|rows| AnswerSet::bindings(vec!["x".into(), "y".into()], rows).unwrap()),
    ]
}

fn qa_pair() -> impl Strategy<Value = (String, String, Option<AnswerSet>)> {
    ("[A-Za-z?' ]{1,40}", "SELECT \\?x WHERE \\{ \\?x [a-z:]{1,10} \"[a-z ]{0,8}\" \\}", prop::option::of(answer_set()))
        .prop_filter("non-blank question", |(q, _, _)| !q.trim().is_empty())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn clean_is_idempotent_and_keeps_literals((text, literals) in sparql_like()) {
        let once = clean(&text);
        prop_assert_eq!(clean(&once), once.clone());
        prop_assert_eq!(literals_in(&once), literals);
        prop_assert!(!once.starts_with(' ') && !once.ends_with(' '));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn corpus_survives_save_and_load(pairs in vec(qa_pair(), 1..8)) {
        let pairs: Vec<QaPair> = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (question, sparql, gold_answers))| QaPair { id: format!("q{i}"), question, sparql, gold_answers })
            .collect();
        let corpus = Corpus::new(Split::Dev, pairs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dev.json");
        save_split(&corpus, &path).unwrap();
        let back = load_split(&path, Split::Dev).unwrap();
        prop_assert_eq!(back, corpus);
    }

    #[test]
    fn smaller_top_n_is_a_prefix(query in "[a-z][a-z ]{0,40}", k in 1usize..10, m in 10usize..40) {
        let corpus = common::retrieval_corpus();
        let embedder = HashedTrigramEmbedder::with_dim(64);
        let index = build_index(&corpus, &embedder, Execution::Sequential).unwrap();
        let short = index.top_n(&embedder, &query, k).unwrap();
        let long = index.top_n(&embedder, &query, m).unwrap();
        prop_assert_eq!(&long[..k], &short[..]);
        prop_assert!(long.windows(2).all(|w| w[0].score > w[1].score
            || (w[0].score == w[1].score && w[0].position < w[1].position)));
    }

    #[test]
    fn swapping_gold_and_system_swaps_precision_and_recall(g in answer_set(), s in answer_set()) {
        let a = score_question("q", &g, SystemAnswer::Answer(&s));
        let b = score_question("q", &s, SystemAnswer::Answer(&g));
        prop_assert_eq!(a.precision, b.recall);
        prop_assert_eq!(a.recall, b.precision);
        prop_assert_eq!(a.f1, b.f1);
        prop_assert!((0.0..=1.0).contains(&a.f1));
    }

    #[test]
    fn null_report_ignores_order(flags in vec((any::<bool>(), any::<bool>(), any::<bool>()), 0..60), seed in any::<u64>()) {
        let scores: Vec<QuestionScore> = flags
            .iter()
            .enumerate()
            .map(|(i, &(gold_null, system_null, syntax_rejected))| QuestionScore {
                question_id: format!("q{i}"),
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
                gold_null,
                system_null,
                syntax_rejected,
                kind_mismatch: false,
            })
            .collect();
        let mut shuffled = scores.clone();
        use rand::{seq::SliceRandom, SeedableRng};
        shuffled.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
        let r = null_accounting(&scores);
        prop_assert_eq!(r, null_accounting(&shuffled));
        prop_assert!(r.null_both <= r.null_gold.min(r.null_system));
        prop_assert!(r.null_system_syntax <= r.null_system);
    }

    #[test]
    fn extraction_is_stable_on_its_own_output(body in "\\?[a-z]{1,5} [a-z]{1,5}:[A-Z]{1,5} \"[a-z ]{0,6}\"", noise in "[A-Za-z ,]{0,30}") {
        let completion = format!("{noise}\n```sparql\nSELECT * WHERE {{ {body} }}\n```\n{noise}");
        let (first, _) = extract_text(&completion).unwrap();
        let (second, _) = extract_text(&first).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn execution_strategies_agree(items in vec(any::<u32>(), 0..200), workers in 1usize..6) {
        let f = |x: &u32| x.wrapping_mul(2654435761).rotate_left(7);
        let seq = Execution::Sequential.map(&items, f);
        prop_assert_eq!(&Execution::Parallel.map(&items, f), &seq);
        prop_assert_eq!(&Execution::Bounded(workers).map(&items, f), &seq);
    }
}

#[test]
fn failed_system_answers_follow_the_empty_convention() {
    let empty = AnswerSet::empty(vec!["x".into()]);
    let full = AnswerSet::column("x", ["a"]);
    let failed = SystemAnswer::Failed { syntax_rejected: false };
    assert_eq!(score_question("q", &empty, failed).f1, 1.0);
    assert_eq!(score_question("q", &full, failed).f1, 0.0);
}
