//! Question/SPARQL datasets.
//!
//! A dataset file is a UTF-8 JSON array of records. Each record carries an
//! id, a natural-language question, the gold query and, optionally, the
//! gold answers. Field locations are configurable through [`FieldMap`] so
//! files with nested layouts (for example `question.string`) load without
//! conversion. Gold queries are stored verbatim.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::answer::{normalize_plain, results_from_value, AnswerSet, Normalization};
use crate::http::json_path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}` (expected train, dev or test)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub id: String,
    pub question: String,
    #[serde(rename = "query")]
    pub sparql: String,
    #[serde(rename = "answers", default, skip_serializing_if = "Option::is_none")]
    pub gold_answers: Option<AnswerSet>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub split: Split,
    pub pairs: Vec<QaPair>,
}

impl Corpus {
    /// Build a corpus, checking the same invariants as [`load_split`].
    pub fn new(split: Split, pairs: Vec<QaPair>) -> Result<Self, CorpusError> {
        check_pairs(&pairs)?;
        Ok(Self { split, pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&QaPair> {
        self.pairs.iter().find(|p| p.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, QaPair> {
        self.pairs.iter()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: not valid JSON: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("record {index}: field `{field}`: {reason}")]
    Malformed { index: usize, field: String, reason: String },
    #[error("record {index}: duplicate id `{id}`")]
    DuplicateId { index: usize, id: String },
    #[error("empty corpus")]
    Empty,
    #[error("invalid field map `{0}`")]
    FieldMap(String),
}

/// Where each record field lives, as dotted paths (`question.string`,
/// `answers.0`). `records` locates the record array inside a top-level
/// object; empty means the document itself is the array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMap {
    pub records: String,
    pub id: String,
    pub question: String,
    pub query: String,
    pub answers: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        Self {
            records: String::new(),
            id: "id".into(),
            question: "question".into(),
            query: "query".into(),
            answers: "answers".into(),
        }
    }
}

impl FromStr for FieldMap {
    type Err = CorpusError;

    /// Parse `key=path` pairs separated by commas, e.g.
    /// `question=question.string,query=query.sparql`. Unmentioned keys keep
    /// their defaults.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut map = FieldMap::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, path) = part.split_once('=').ok_or_else(|| CorpusError::FieldMap(part.to_string()))?;
            let path = path.trim().to_string();
            match key.trim() {
                "records" => map.records = path,
                "id" => map.id = path,
                "question" => map.question = path,
                "query" => map.query = path,
                "answers" => map.answers = path,
                _ => return Err(CorpusError::FieldMap(part.to_string())),
            }
        }
        Ok(map)
    }
}

pub fn load_split(path: &Path, split: Split) -> Result<Corpus, CorpusError> {
    load_split_with(path, split, &FieldMap::default(), Normalization::Lenient)
}

pub fn load_split_with(
    path: &Path,
    split: Split,
    fields: &FieldMap,
    mode: Normalization,
) -> Result<Corpus, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let doc: Value =
        serde_json::from_slice(&bytes).map_err(|source| CorpusError::Json { path: path.to_path_buf(), source })?;
    parse_records(&doc, split, fields, mode)
}

pub(crate) fn parse_records(
    doc: &Value,
    split: Split,
    fields: &FieldMap,
    mode: Normalization,
) -> Result<Corpus, CorpusError> {
    let records = json_path(doc, &fields.records).and_then(Value::as_array).ok_or_else(|| CorpusError::Malformed {
        index: 0,
        field: if fields.records.is_empty() { "$".into() } else { fields.records.clone() },
        reason: "expected an array of records".into(),
    })?;
    let pairs =
        records.iter().enumerate().map(|(i, r)| parse_record(i, r, fields, mode)).collect::<Result<Vec<_>, _>>()?;
    Corpus::new(split, pairs)
}

fn parse_record(index: usize, record: &Value, fields: &FieldMap, mode: Normalization) -> Result<QaPair, CorpusError> {
    let malformed = |field: &str, reason: &str| CorpusError::Malformed {
        index,
        field: field.to_string(),
        reason: reason.to_string(),
    };
    if !record.is_object() {
        return Err(malformed("$", "expected an object"));
    }
    let id = match json_path(record, &fields.id) {
        None | Some(Value::Null) => format!("{index:05}"),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => return Err(malformed(&fields.id, "expected a string or number")),
    };
    let text_field = |path: &str| -> Result<String, CorpusError> {
        match json_path(record, path) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(malformed(path, "expected a string")),
            None => Err(malformed(path, "missing")),
        }
    };
    let question = text_field(&fields.question)?;
    let sparql = text_field(&fields.query)?;
    let gold_answers = match json_path(record, &fields.answers) {
        None | Some(Value::Null) => None,
        Some(v) => Some(parse_answers(v, mode).map_err(|reason| malformed(&fields.answers, &reason))?),
    };
    Ok(QaPair { id, question, sparql, gold_answers })
}

/// Accepts this crate's own answer-set form, a SPARQL JSON results
/// document, a bare boolean, or a list of values / value tuples (matched
/// to system answers by position).
fn parse_answers(v: &Value, mode: Normalization) -> Result<AnswerSet, String> {
    match v {
        Value::Bool(b) => Ok(AnswerSet::Boolean { truth: *b }),
        Value::Object(o) if o.contains_key("kind") => serde_json::from_value(v.clone()).map_err(|e| e.to_string()),
        Value::Object(_) => results_from_value(v, mode).map_err(|e| e.to_string()),
        Value::Array(items) => {
            let rows = items
                .iter()
                .map(|item| match item {
                    Value::Array(cells) => cells.iter().map(|c| scalar(c, mode)).collect(),
                    other => scalar(other, mode).map(|c| vec![c]),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let arity = rows.first().map_or(1, Vec::len);
            let vars = (1..=arity).map(|i| format!("_{i}")).collect();
            AnswerSet::bindings(vars, rows).map_err(|e| e.to_string())
        }
        _ => Err("expected an answer set, results document, boolean or list".into()),
    }
}

fn scalar(v: &Value, mode: Normalization) -> Result<Option<String>, String> {
    match v {
        Value::Null => Ok(None),
        Value::String(s) => Ok(Some(normalize_plain(s, mode))),
        Value::Number(n) => Ok(Some(normalize_plain(&n.to_string(), mode))),
        Value::Bool(b) => Ok(Some(b.to_string())),
        _ => Err("answer values must be scalars".into()),
    }
}

fn check_pairs(pairs: &[QaPair]) -> Result<(), CorpusError> {
    if pairs.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut seen = HashSet::new();
    for (index, p) in pairs.iter().enumerate() {
        let blank =
            |field: &str| CorpusError::Malformed { index, field: field.into(), reason: "empty after trimming".into() };
        if p.id.trim().is_empty() {
            return Err(blank("id"));
        }
        if p.question.trim().is_empty() {
            return Err(blank("question"));
        }
        if p.sparql.trim().is_empty() {
            return Err(blank("query"));
        }
        if !seen.insert(p.id.as_str()) {
            return Err(CorpusError::DuplicateId { index, id: p.id.clone() });
        }
    }
    Ok(())
}

/// Serialize a corpus in the canonical layout (`id`, `question`, `query`,
/// `answers`). Output is byte-stable for equal corpora.
pub fn to_json_string(corpus: &Corpus) -> Result<String, CorpusError> {
    check_pairs(&corpus.pairs)?;
    let mut s = serde_json::to_string_pretty(&corpus.pairs).expect("corpus serializes");
    s.push('\n');
    Ok(s)
}

pub fn save_split(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let s = to_json_string(corpus)?;
    std::fs::write(path, s).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(doc: Value) -> Result<Corpus, CorpusError> {
        parse_records(&doc, Split::Dev, &FieldMap::default(), Normalization::Lenient)
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(parse(json!([])), Err(CorpusError::Empty)));
    }

    #[test]
    fn malformed_record_reports_index_and_field() {
        let err = parse(json!([
            {"id": "a", "question": "q?", "query": "SELECT * {}"},
            {"id": "b", "question": 7, "query": "SELECT * {}"}
        ]))
        .unwrap_err();
        match err {
            CorpusError::Malformed { index, field, .. } => {
                assert_eq!(index, 1);
                assert_eq!(field, "question");
            }
            other => panic!("{other:?}"),
        }
        let err = parse(json!([{"id": "a", "question": "  ", "query": "SELECT"}])).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { index: 0, ref field, .. } if field == "question"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = parse(json!([
            {"id": "a", "question": "q1", "query": "ASK {}"},
            {"id": "a", "question": "q2", "query": "ASK {}"}
        ]))
        .unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId { index: 1, .. }));
    }

    #[test]
    fn missing_ids_are_synthesized_from_position() {
        let c = parse(json!([
            {"question": "q1", "query": "ASK {}"},
            {"question": "q2", "query": "ASK {}"}
        ]))
        .unwrap();
        assert_eq!(c.pairs[0].id, "00000");
        assert_eq!(c.pairs[1].id, "00001");
    }

    #[test]
    fn nested_field_map() {
        let fields: FieldMap =
            "records=questions,question=question.string,query=query.sparql,answers=gold".parse().unwrap();
        let doc = json!({"questions": [
            {"id": "AQ1", "question": {"string": "Which models?"}, "query": {"sparql": "SELECT ?m {\n ?m ?p ?o }"},
             "gold": ["A", 5.0]}
        ]});
        let c = parse_records(&doc, Split::Test, &fields, Normalization::Lenient).unwrap();
        assert_eq!(c.pairs[0].question, "Which models?");
        assert_eq!(c.pairs[0].sparql, "SELECT ?m {\n ?m ?p ?o }");
        assert_eq!(c.pairs[0].gold_answers, Some(AnswerSet::column("_1", ["5", "A"])));
        assert!("bogus=x".parse::<FieldMap>().is_err());
    }

    #[test]
    fn answer_forms() {
        let c = parse(json!([
            {"id": "1", "question": "q", "query": "ASK {}", "answers": true},
            {"id": "2", "question": "q", "query": "SELECT", "answers": {"head": {"vars": ["x"]}, "results": {"bindings": [{"x": {"type": "literal", "value": "1.0"}}]}}},
            {"id": "3", "question": "q", "query": "SELECT", "answers": [["a", null], ["b", "c"]]},
            {"id": "4", "question": "q", "query": "SELECT", "answers": {"kind": "bindings", "vars": ["v"], "rows": []}}
        ]))
        .unwrap();
        assert_eq!(c.pairs[0].gold_answers, Some(AnswerSet::Boolean { truth: true }));
        assert_eq!(c.pairs[1].gold_answers, Some(AnswerSet::column("x", ["1"])));
        assert_eq!(
            c.pairs[2].gold_answers,
            Some(
                AnswerSet::bindings(
                    vec!["_1".into(), "_2".into()],
                    vec![vec![Some("a".into()), None], vec![Some("b".into()), Some("c".into())]]
                )
                .unwrap()
            )
        );
        assert!(c.pairs[3].gold_answers.as_ref().unwrap().is_null());
    }

    #[test]
    fn unreadable_file() {
        let err = load_split(Path::new("/nonexistent/dir/train.json"), Split::Train).unwrap_err();
        assert!(matches!(err, CorpusError::Io { .. }));
    }

    #[test]
    fn cannot_save_empty() {
        let c = Corpus { split: Split::Dev, pairs: vec![] };
        assert!(matches!(to_json_string(&c), Err(CorpusError::Empty)));
    }
}
