use std::collections::HashSet;
use std::path::Path;

use thiserror::Error;

use super::lexer::{tokenize, LexError, Token, TokenKind};

const DEFAULT_TABLE: &str = include_str!("../../data/prefixes.tsv");

/// Ordered prefix → namespace table, read from `prefix<TAB>iri` lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixTable {
    entries: Vec<(String, String)>,
}

#[derive(Debug, Error)]
pub enum PrefixTableError {
    #[error("line {line}: expected `prefix<TAB>iri`")]
    Malformed { line: usize },
    #[error("line {line}: duplicate prefix `{prefix}`")]
    Duplicate { line: usize, prefix: String },
    #[error("reading prefix table: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnsurePrefixesError {
    #[error("prefixes used but not declared and not in the prefix table: {}", .0.join(", "))]
    Unknown(Vec<String>),
    #[error(transparent)]
    Lex(#[from] LexError),
}

impl Default for PrefixTable {
    /// ORKG class/predicate/shape/resource namespaces plus rdf, rdfs, xsd.
    fn default() -> Self {
        Self::parse(DEFAULT_TABLE).expect("bundled prefix table parses")
    }
}

impl PrefixTable {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn parse(text: &str) -> Result<Self, PrefixTableError> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (prefix, iri) = trimmed
                .split_once('\t')
                .map(|(p, i)| (p.trim(), i.trim()))
                .filter(|(p, i)| !p.is_empty() && !i.is_empty())
                .ok_or(PrefixTableError::Malformed { line: line_no })?;
            let prefix = prefix.trim_end_matches(':');
            let iri = iri.trim_start_matches('<').trim_end_matches('>');
            if entries.iter().any(|(p, _)| p == prefix) {
                return Err(PrefixTableError::Duplicate { line: line_no, prefix: prefix.to_string() });
            }
            entries.push((prefix.to_string(), iri.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, PrefixTableError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, prefix: &str) -> Option<&str> {
        self.entries.iter().find(|(p, _)| p == prefix).map(|(_, iri)| iri.as_str())
    }

    pub fn contains(&self, prefix: &str) -> bool {
        self.get(prefix).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(p, i)| (p.as_str(), i.as_str()))
    }
}

/// Prefixes declared with `PREFIX p: <...>` in the token stream.
pub(crate) fn declared_prefixes(tokens: &[Token]) -> HashSet<String> {
    tokens
        .windows(2)
        .filter(|w| w[0].is_keyword("PREFIX") && w[1].kind == TokenKind::PrefixedName)
        .filter_map(|w| w[1].text.strip_suffix(':').map(str::to_string))
        .collect()
}

/// Prefixes used by prefixed names outside `PREFIX` declarations, in order of
/// first use. Blank-node labels (`_:`) are not prefixes.
pub(crate) fn used_prefixes(tokens: &[Token]) -> Vec<(String, usize)> {
    let mut seen = HashSet::new();
    let mut used = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        let Some(prefix) = tok.prefix() else { continue };
        if prefix == "_" || (i > 0 && tokens[i - 1].is_keyword("PREFIX")) {
            continue;
        }
        if seen.insert(prefix.to_string()) {
            used.push((prefix.to_string(), tok.offset));
        }
    }
    used
}

/// Prepend `PREFIX` declarations for every prefix the query uses without
/// declaring. Declarations come from `table`, in order of first use. A query
/// with nothing missing is returned byte-identical.
pub fn ensure_prefixes(text: &str, table: &PrefixTable) -> Result<String, EnsurePrefixesError> {
    let tokens = tokenize(text)?;
    let declared = declared_prefixes(&tokens);
    let missing: Vec<String> =
        used_prefixes(&tokens).into_iter().map(|(p, _)| p).filter(|p| !declared.contains(p)).collect();
    if missing.is_empty() {
        return Ok(text.to_string());
    }
    let unknown: Vec<String> = missing.iter().filter(|p| !table.contains(p)).cloned().collect();
    if !unknown.is_empty() {
        return Err(EnsurePrefixesError::Unknown(unknown));
    }
    let mut out = String::new();
    for p in &missing {
        let iri = table.get(p).unwrap_or_default();
        out.push_str(&format!("PREFIX {p}: <{iri}> "));
    }
    out.push_str(text);
    Ok(out)
}
