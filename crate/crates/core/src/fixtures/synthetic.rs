//! Deterministic SciQA-style question/query pairs over ORKG vocabulary.
//!
//! Pair `i` uses template `i % TEMPLATE_COUNT` filled with an entity picked
//! from `i / TEMPLATE_COUNT`. Answers are derived from a hash of the cleaned
//! query, so different queries never share answer rows.

use crate::answer::AnswerSet;
use crate::corpus::{Corpus, QaPair, Split};
use crate::retrieval::fnv1a64;
use crate::sparql::clean;

use super::FixtureEndpoint;

const DATASETS: [&str; 40] = [
    "BoolQ",
    "Jacquard dataset",
    "SQuAD1.1",
    "CoQA",
    "WikiText-103",
    "Penn Treebank",
    "ImageNet",
    "CIFAR-10",
    "CIFAR-100",
    "MNIST",
    "COCO",
    "Pascal VOC 2012",
    "Cityscapes",
    "WMT2014 English-German",
    "IWSLT2015 German-English",
    "SST-2 Binary classification",
    "MultiNLI",
    "SNLI",
    "Words in Context",
    "RTE",
    "HellaSwag",
    "PIQA",
    "WinoGrande",
    "ARC (Challenge)",
    "TriviaQA",
    "Natural Questions",
    "HotpotQA",
    "DBpedia",
    "AG News",
    "Yelp Binary classification",
    "IMDb",
    "Atari 2600 Breakout",
    "Atari 2600 Pong",
    "STL-10",
    "SVHN",
    "Kinetics-400",
    "UCF101",
    "ShapeNet",
    "ModelNet40",
    "LibriSpeech test-clean",
];

const MODELS: [&str; 30] = [
    "BERT",
    "RoBERTa",
    "XLNet",
    "T5-11B",
    "GPT-3",
    "ALBERT",
    "ELECTRA",
    "DeBERTa",
    "ResNet-50",
    "ResNet-152",
    "EfficientNet-B7",
    "ViT-H/14",
    "DenseNet",
    "Inception V3",
    "VGG-16",
    "Transformer Big",
    "ConvS2S",
    "LSTM",
    "AWD-LSTM",
    "Transformer-XL",
    "DQN",
    "Rainbow",
    "PPO",
    "A3C",
    "Mask R-CNN",
    "YOLOv3",
    "U-Net",
    "PointNet",
    "wav2vec 2.0",
    "Conformer",
];

pub const TEMPLATE_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticPair {
    pub question: String,
    pub sparql: String,
    pub answers: AnswerSet,
    /// Filled into the template's string literal.
    pub entity: String,
}

fn entity(pool: &[&str], k: usize) -> String {
    let base = pool[k % pool.len()];
    match k / pool.len() {
        0 => base.to_string(),
        round => format!("{base} {}", round + 1),
    }
}

fn template(t: usize, e: &str) -> (String, String, Vec<&'static str>) {
    match t {
        0 => (
            format!("What models are being evaluated on the {e} dataset?"),
            format!(
                "SELECT DISTINCT ?model ?model_lbl WHERE {{\n  ?dataset a orkgc:Dataset;\n    rdfs:label ?dataset_lbl.\n  FILTER (str(?dataset_lbl) = \"{e}\")\n  ?benchmark orkgp:HAS_DATASET ?dataset.\n  ?cont orkgp:HAS_BENCHMARK ?benchmark.\n  ?cont orkgp:HAS_MODEL ?model.\n  ?model rdfs:label ?model_lbl.\n}}"
            ),
            vec!["model", "model_lbl"],
        ),
        1 => (
            format!("What is the top benchmark score and its metric on the {e} dataset?"),
            format!(
                "SELECT DISTINCT ?metric ?metric_lbl (MAX(?value) AS ?score) WHERE {{\n  ?dataset a orkgc:Dataset;\n    rdfs:label ?dataset_lbl.\n  FILTER (str(?dataset_lbl) = \"{e}\")\n  ?benchmark orkgp:HAS_DATASET ?dataset;\n    orkgp:HAS_EVALUATION ?eval.\n  ?eval orkgp:HAS_VALUE ?value;\n    orkgp:HAS_METRIC ?metric.\n  ?metric rdfs:label ?metric_lbl.\n}}\nGROUP BY ?metric ?metric_lbl"
            ),
            vec!["metric", "metric_lbl", "score"],
        ),
        2 => (
            format!("Provide a list of research paper titles and IDs that have benchmarked models on the {e} dataset?"),
            format!(
                "SELECT DISTINCT ?paper ?paper_lbl WHERE {{\n  ?dataset a orkgc:Dataset;\n    rdfs:label ?dataset_lbl.\n  FILTER (str(?dataset_lbl) = \"{e}\")\n  ?benchmark orkgp:HAS_DATASET ?dataset.\n  ?cont orkgp:HAS_BENCHMARK ?benchmark.\n  ?paper orkgp:P31 ?cont;\n    rdfs:label ?paper_lbl.\n}}"
            ),
            vec!["paper", "paper_lbl"],
        ),
        3 => (
            format!("Where can I find code references in papers that have used the {e} model for benchmarking purposes?"),
            format!(
                "SELECT DISTINCT ?code WHERE {{\n  ?model a orkgc:Model;\n    rdfs:label ?model_lbl.\n  FILTER (str(?model_lbl) = \"{e}\")\n  ?benchmark orkgp:HAS_DATASET ?dataset.\n  ?cont orkgp:HAS_BENCHMARK ?benchmark.\n  ?cont orkgp:HAS_MODEL ?model;\n    orkgp:HAS_SOURCE_CODE ?code.\n}}"
            ),
            vec!["code"],
        ),
        _ => (
            format!("Is there a benchmark that uses the {e} dataset?"),
            format!(
                "ASK {{\n  ?dataset a orkgc:Dataset;\n    rdfs:label ?dataset_lbl.\n  FILTER (str(?dataset_lbl) = \"{e}\")\n  ?benchmark orkgp:HAS_DATASET ?dataset.\n}}"
            ),
            Vec::new(),
        ),
    }
}

/// Answers for `sparql`, derived from its hash. With `non_empty` the result
/// always has at least one row.
fn answers_for(sparql: &str, vars: &[&str], non_empty: bool) -> AnswerSet {
    let h = fnv1a64(clean(sparql).as_bytes());
    if vars.is_empty() {
        return AnswerSet::Boolean { truth: h.is_multiple_of(2) };
    }
    if !non_empty && h.is_multiple_of(13) {
        return AnswerSet::empty(vars.iter().map(|v| v.to_string()).collect());
    }
    let rows = (0..1 + (h >> 8) % 3).map(|r| {
        vars.iter()
            .map(|v| {
                Some(match *v {
                    "score" => format!("{}.{}", 50 + (h >> 16) % 50, r + 1),
                    v if v.ends_with("_lbl") => format!("{v} {h:016x} {r}"),
                    "code" => format!("https://github.com/orkg/r{h:016x}/{r}"),
                    _ => format!("http://orkg.org/orkg/resource/R{h:016x}{r}"),
                })
            })
            .collect()
    });
    AnswerSet::bindings(vars.iter().map(|v| v.to_string()).collect(), rows).expect("rows match vars")
}

/// The first `n` synthetic pairs. Questions are pairwise distinct.
pub fn sciqa_like(n: usize) -> Vec<SyntheticPair> {
    (0..n)
        .map(|i| {
            let t = i % TEMPLATE_COUNT;
            let k = i / TEMPLATE_COUNT;
            let e = if t == 3 { entity(&MODELS, k) } else { entity(&DATASETS, k) };
            let (question, sparql, vars) = template(t, &e);
            let answers = answers_for(&sparql, &vars, false);
            SyntheticPair { question, sparql, answers, entity: e }
        })
        .collect()
}

/// Train/test corpora where every test question repeats a train question,
/// and an endpoint that knows every gold query.
#[derive(Debug, Clone)]
pub struct MemorizationFixture {
    pub train: Corpus,
    pub test: Corpus,
    pub endpoint: FixtureEndpoint,
    /// Test ids whose gold query carries an altered literal.
    pub perturbed: Vec<String>,
}

/// Test question `j` repeats train question `j * train_n / test_n`. With
/// `perturb_every = Some(k)`, every k-th test question (starting at 0) gets
/// a leading space inside its gold literal and answers disjoint from the
/// unaltered query's.
pub fn memorization_fixture(train_n: usize, test_n: usize, perturb_every: Option<usize>) -> MemorizationFixture {
    assert!(test_n > 0 && test_n <= train_n, "need 0 < test_n <= train_n");
    let pairs = sciqa_like(train_n);
    let mut endpoint = FixtureEndpoint::new();
    for p in &pairs {
        endpoint.insert(&p.sparql, p.answers.clone());
    }
    let train_pairs = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| QaPair {
            id: format!("train-{i:05}"),
            question: p.question.clone(),
            sparql: p.sparql.clone(),
            gold_answers: Some(p.answers.clone()),
        })
        .collect();
    let mut perturbed = Vec::new();
    let mut test_pairs = Vec::with_capacity(test_n);
    for j in 0..test_n {
        let src = &pairs[j * train_n / test_n];
        let id = format!("test-{j:05}");
        let (sparql, answers) = match perturb_every {
            Some(k) if k > 0 && j % k == 0 => {
                perturbed.push(id.clone());
                let altered = src.sparql.replacen(&format!("\"{}\"", src.entity), &format!("\" {}\"", src.entity), 1);
                let answers = match &src.answers {
                    AnswerSet::Boolean { truth } => AnswerSet::Boolean { truth: !truth },
                    AnswerSet::Bindings { vars, .. } => {
                        let vars: Vec<&str> = vars.iter().map(String::as_str).collect();
                        answers_for(&altered, &vars, true)
                    }
                };
                endpoint.insert(&altered, answers.clone());
                (altered, answers)
            }
            _ => (src.sparql.clone(), src.answers.clone()),
        };
        test_pairs.push(QaPair { id, question: src.question.clone(), sparql, gold_answers: Some(answers) });
    }
    MemorizationFixture {
        train: Corpus::new(Split::Train, train_pairs).expect("synthetic train corpus is valid"),
        test: Corpus::new(Split::Test, test_pairs).expect("synthetic test corpus is valid"),
        endpoint,
        perturbed,
    }
}
