//! Normalized answer sets and the SPARQL 1.1 JSON results format.
//!
//! Values are compared as normalized strings. In the default (lenient)
//! mode an IRI is its full IRI, a language-tagged literal is
//! `lexical@lang` with the tag lowercased, and any literal whose lexical
//! form is a number (with a numeric datatype or none) is rewritten to a
//! canonical decimal, so `"5"^^xsd:integer` and `"5.0"` compare equal.
//! Strict mode keeps raw lexical forms.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

/// One result row; `None` is an unbound slot.
pub type Row = Vec<Option<String>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawAnswerSet")]
pub enum AnswerSet {
    Bindings { vars: Vec<String>, rows: BTreeSet<Row> },
    Boolean { truth: bool },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawAnswerSet {
    Bindings { vars: Vec<String>, rows: Vec<Row> },
    Boolean { truth: bool },
}

impl TryFrom<RawAnswerSet> for AnswerSet {
    type Error = AnswerSetError;

    fn try_from(raw: RawAnswerSet) -> Result<Self, Self::Error> {
        match raw {
            RawAnswerSet::Bindings { vars, rows } => AnswerSet::bindings(vars, rows),
            RawAnswerSet::Boolean { truth } => Ok(AnswerSet::Boolean { truth }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnswerSetError {
    #[error("row {row} has {got} values but there are {expected} variables")]
    Arity { row: usize, got: usize, expected: usize },
}

impl AnswerSet {
    /// Bindings answer set; duplicate rows collapse.
    pub fn bindings(vars: Vec<String>, rows: impl IntoIterator<Item = Row>) -> Result<Self, AnswerSetError> {
        let mut set = BTreeSet::new();
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != vars.len() {
                return Err(AnswerSetError::Arity { row: i, got: row.len(), expected: vars.len() });
            }
            set.insert(row);
        }
        Ok(AnswerSet::Bindings { vars, rows: set })
    }

    pub fn empty(vars: Vec<String>) -> Self {
        AnswerSet::Bindings { vars, rows: BTreeSet::new() }
    }

    /// Single-column answer set over `var`.
    pub fn column<S: Into<String>>(var: &str, values: impl IntoIterator<Item = S>) -> Self {
        AnswerSet::Bindings {
            vars: vec![var.to_string()],
            rows: values.into_iter().map(|v| vec![Some(v.into())]).collect(),
        }
    }

    /// A bindings set with no rows. Boolean answers are never null.
    pub fn is_null(&self) -> bool {
        matches!(self, AnswerSet::Bindings { rows, .. } if rows.is_empty())
    }

    pub fn len(&self) -> usize {
        match self {
            AnswerSet::Bindings { rows, .. } => rows.len(),
            AnswerSet::Boolean { .. } => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.is_null()
    }

    /// Render as a SPARQL JSON results document. Values beginning with
    /// `http://` or `https://` are emitted as IRIs, everything else as plain
    /// literals.
    pub fn to_results_json(&self) -> Value {
        match self {
            AnswerSet::Boolean { truth } => json!({ "head": {}, "boolean": truth }),
            AnswerSet::Bindings { vars, rows } => {
                let bindings: Vec<Value> = rows
                    .iter()
                    .map(|row| {
                        let mut obj = Map::new();
                        for (var, value) in vars.iter().zip(row) {
                            if let Some(v) = value {
                                let kind = if v.starts_with("http://") || v.starts_with("https://") {
                                    "uri"
                                } else {
                                    "literal"
                                };
                                obj.insert(var.clone(), json!({ "type": kind, "value": v }));
                            }
                        }
                        Value::Object(obj)
                    })
                    .collect();
                json!({ "head": { "vars": vars }, "results": { "bindings": bindings } })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Lenient,
    Strict,
}

const NUMERIC_DATATYPES: [&str; 16] = [
    "integer",
    "decimal",
    "double",
    "float",
    "int",
    "long",
    "short",
    "byte",
    "nonNegativeInteger",
    "positiveInteger",
    "negativeInteger",
    "nonPositiveInteger",
    "unsignedInt",
    "unsignedLong",
    "unsignedShort",
    "unsignedByte",
];

fn is_numeric_datatype(dt: &str) -> bool {
    dt.strip_prefix("http://www.w3.org/2001/XMLSchema#").is_some_and(|local| NUMERIC_DATATYPES.contains(&local))
}

/// Canonical decimal form of a numeric lexical value, or `None` when the
/// text is not a number.
pub fn canonical_number(text: &str) -> Option<String> {
    let s = text.trim();
    let (neg, unsigned) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match unsigned.find(['e', 'E']) {
        Some(i) => (&unsigned[..i], Some(&unsigned[i + 1..])),
        None => (unsigned, None),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits_ok = |d: &str| d.bytes().all(|b| b.is_ascii_digit());
    if (int_part.is_empty() && frac_part.is_empty()) || !digits_ok(int_part) || !digits_ok(frac_part) {
        return None;
    }
    if let Some(exp) = exponent {
        let e = exp.strip_prefix('+').unwrap_or(exp);
        let e = e.strip_prefix('-').unwrap_or(e);
        if e.is_empty() || !digits_ok(e) {
            return None;
        }
        let v: f64 = s.parse().ok()?;
        if !v.is_finite() {
            return None;
        }
        if v == v.trunc() && v.abs() < 1e15 {
            return Some(format!("{}", v as i64));
        }
        return Some(format!("{v}"));
    }
    let int = int_part.trim_start_matches('0');
    let frac = frac_part.trim_end_matches('0');
    let mut out = String::new();
    if neg && !(int.is_empty() && frac.is_empty()) {
        out.push('-');
    }
    out.push_str(if int.is_empty() { "0" } else { int });
    if !frac.is_empty() {
        out.push('.');
        out.push_str(frac);
    }
    Some(out)
}

/// Normalize one RDF term from a JSON results binding.
pub fn normalize_term(
    kind: &str,
    value: &str,
    lang: Option<&str>,
    datatype: Option<&str>,
    mode: Normalization,
) -> String {
    match kind {
        "bnode" => format!("_:{value}"),
        "uri" => value.to_string(),
        _ => match (mode, lang) {
            (Normalization::Strict, Some(l)) => format!("{value}@{l}"),
            (Normalization::Strict, None) => value.to_string(),
            (Normalization::Lenient, Some(l)) => format!("{value}@{}", l.to_lowercase()),
            (Normalization::Lenient, None) => {
                let numeric_ok = datatype.is_none_or(is_numeric_datatype);
                numeric_ok.then(|| canonical_number(value)).flatten().unwrap_or_else(|| value.to_string())
            }
        },
    }
}

/// Normalize a bare value as found in a dataset's answer list.
pub fn normalize_plain(value: &str, mode: Normalization) -> String {
    normalize_term("literal", value, None, None, mode)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResultsError {
    #[error("results payload is not JSON ({0})")]
    Json(String),
    #[error("malformed results at {location}: {reason}")]
    Shape { location: String, reason: String },
}

fn shape(location: impl Into<String>, reason: impl Into<String>) -> ResultsError {
    ResultsError::Shape { location: location.into(), reason: reason.into() }
}

/// Parse a SPARQL JSON results document.
pub fn parse_results_json(payload: &[u8], mode: Normalization) -> Result<AnswerSet, ResultsError> {
    let doc: Value = serde_json::from_slice(payload).map_err(|e| ResultsError::Json(e.to_string()))?;
    results_from_value(&doc, mode)
}

pub(crate) fn results_from_value(doc: &Value, mode: Normalization) -> Result<AnswerSet, ResultsError> {
    let obj = doc.as_object().ok_or_else(|| shape("$", "expected an object"))?;
    if let Some(b) = obj.get("boolean") {
        let truth = b.as_bool().ok_or_else(|| shape("boolean", "expected true or false"))?;
        return Ok(AnswerSet::Boolean { truth });
    }
    let vars: Vec<String> = obj
        .get("head")
        .and_then(|h| h.get("vars"))
        .ok_or_else(|| shape("head.vars", "missing"))?
        .as_array()
        .ok_or_else(|| shape("head.vars", "expected an array"))?
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_str().map(str::to_string).ok_or_else(|| shape(format!("head.vars[{i}]"), "expected a string"))
        })
        .collect::<Result<_, _>>()?;
    let bindings = obj
        .get("results")
        .and_then(|r| r.get("bindings"))
        .ok_or_else(|| shape("results.bindings", "missing"))?
        .as_array()
        .ok_or_else(|| shape("results.bindings", "expected an array"))?;

    let mut rows = BTreeSet::new();
    for (i, binding) in bindings.iter().enumerate() {
        let b = binding.as_object().ok_or_else(|| shape(format!("results.bindings[{i}]"), "expected an object"))?;
        let mut row = Vec::with_capacity(vars.len());
        for var in &vars {
            let slot = match b.get(var) {
                None | Some(Value::Null) => None,
                Some(term) => Some(parse_term(term, &format!("results.bindings[{i}].{var}"), mode)?),
            };
            row.push(slot);
        }
        rows.insert(row);
    }
    Ok(AnswerSet::Bindings { vars, rows })
}

fn parse_term(term: &Value, location: &str, mode: Normalization) -> Result<String, ResultsError> {
    let t = term.as_object().ok_or_else(|| shape(location, "expected a term object"))?;
    let field = |name: &str| t.get(name).and_then(Value::as_str);
    let kind = field("type").ok_or_else(|| shape(location, "term has no `type`"))?;
    let value = field("value").ok_or_else(|| shape(location, "term has no `value`"))?;
    if !matches!(kind, "uri" | "literal" | "typed-literal" | "bnode") {
        return Err(shape(location, format!("unknown term type `{kind}`")));
    }
    Ok(normalize_term(kind, value, field("xml:lang"), field("datatype"), mode))
}
