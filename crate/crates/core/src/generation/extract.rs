//! Pull a single SPARQL query out of a raw completion.
//!
//! Order of attempts: a fenced code block, then a leading `Sparql:` label,
//! then anchoring at the first SPARQL lead keyword. In every case the query
//! runs from its lead keyword through the last balanced closing brace plus
//! any trailing solution modifiers, and is cleaned.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::RawCompletion;
use crate::sparql::{clean, tokenize, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMethod {
    /// The completion was exactly one query.
    Verbatim,
    /// A code fence or `Sparql:` label was removed.
    FenceStripped,
    /// Text before the lead keyword or after the query body was dropped.
    /// Flagged in reports because it can truncate multi-statement output.
    KeywordAnchored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedQuery {
    pub sparql: String,
    pub extraction_method: ExtractionMethod,
    pub raw: RawCompletion,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("unparseable completion: no SPARQL query found")]
    Unparseable { raw: String },
}

pub fn extract_sparql(raw: &RawCompletion) -> Result<ExtractedQuery, ExtractError> {
    let (sparql, extraction_method) = extract_text(&raw.text)?;
    Ok(ExtractedQuery { sparql, extraction_method, raw: raw.clone() })
}

pub fn extract_text(text: &str) -> Result<(String, ExtractionMethod), ExtractError> {
    let unparseable = || ExtractError::Unparseable { raw: text.to_string() };
    let (candidate, mut stripped) = match fenced_block(text) {
        Some(inner) => (inner, true),
        None => (text, false),
    };
    let candidate = match strip_label(candidate) {
        Some(rest) => {
            stripped = true;
            rest
        }
        None => candidate,
    };
    let cleaned = clean(candidate);
    let (tokens, complete) = match tokenize(&cleaned) {
        Ok(t) => (t, true),
        Err(e) => (tokenize(&cleaned[..e.offset()]).unwrap_or_default(), false),
    };
    let anchor = (0..tokens.len()).find(|&i| is_lead(&tokens, i)).ok_or_else(unparseable)?;
    let start = tokens[anchor].offset;
    let end = if complete {
        let last = query_end(&tokens, anchor);
        tokens[last].offset + tokens[last].text.len()
    } else {
        cleaned.len()
    };
    let sparql = cleaned[start..end].trim().to_string();
    let method = if stripped {
        ExtractionMethod::FenceStripped
    } else if start == 0 && end == cleaned.len() {
        ExtractionMethod::Verbatim
    } else {
        ExtractionMethod::KeywordAnchored
    };
    Ok((sparql, method))
}

fn fenced_block(text: &str) -> Option<&str> {
    let open = text.find("```")?;
    let after = &text[open + 3..];
    // An info string such as `sparql` occupies the rest of the opening line.
    let body = match after.find('\n') {
        Some(nl) if !after[..nl].trim().contains(char::is_whitespace) && !after[..nl].contains('{') => {
            let tag = after[..nl].trim();
            if tag.is_empty() || !is_lead_word(tag) {
                &after[nl + 1..]
            } else {
                after
            }
        }
        _ => after,
    };
    Some(match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    })
}

fn strip_label(text: &str) -> Option<&str> {
    let t = text.trim_start();
    let head = t.get(..7)?;
    head.eq_ignore_ascii_case("sparql:").then(|| &t[7..])
}

const LEAD_WORDS: [&str; 6] = ["PREFIX", "BASE", "SELECT", "ASK", "CONSTRUCT", "DESCRIBE"];

fn is_lead_word(w: &str) -> bool {
    LEAD_WORDS.iter().any(|k| w.eq_ignore_ascii_case(k))
}

/// A lead keyword only counts when the next token can continue a query,
/// so prose like "the examples do not ask about ..." is not an anchor.
fn is_lead(tokens: &[Token], i: usize) -> bool {
    let tok = &tokens[i];
    if tok.kind != TokenKind::Keyword {
        return false;
    }
    let Some(next) = tokens.get(i + 1) else {
        return false;
    };
    let word = tok.text.to_ascii_uppercase();
    match word.as_str() {
        "SELECT" => {
            next.kind == TokenKind::Variable
                || next.is_punct("*")
                || next.is_punct("(")
                || next.is_keyword("DISTINCT")
                || next.is_keyword("REDUCED")
        }
        "ASK" | "CONSTRUCT" => next.is_punct("{") || next.is_keyword("WHERE") || next.is_keyword("FROM"),
        "DESCRIBE" => {
            matches!(next.kind, TokenKind::Variable | TokenKind::Iri | TokenKind::PrefixedName) || next.is_punct("*")
        }
        "PREFIX" => next.kind == TokenKind::PrefixedName && next.text.ends_with(':'),
        "BASE" => next.kind == TokenKind::Iri,
        _ => false,
    }
}

const MODIFIER_WORDS: [&str; 8] = ["GROUP", "BY", "HAVING", "ORDER", "ASC", "DESC", "LIMIT", "OFFSET"];

/// Index of the last token belonging to the query that starts at `anchor`.
fn query_end(tokens: &[Token], anchor: usize) -> usize {
    let mut depth = 0usize;
    let mut seen_brace = false;
    let mut i = anchor;
    while i < tokens.len() {
        let t = &tokens[i];
        if t.is_punct("{") {
            depth += 1;
            seen_brace = true;
        } else if t.is_punct("}") && depth > 0 {
            depth -= 1;
            if depth == 0 {
                let end = skip_modifiers(tokens, i + 1);
                match tokens.get(end) {
                    Some(n) if n.is_punct("{") || n.is_keyword("WHERE") || n.is_keyword("VALUES") => {
                        i = end;
                        continue;
                    }
                    _ => return end - 1,
                }
            }
        }
        i += 1;
    }
    let _ = seen_brace;
    tokens.len() - 1
}

/// First index at or after `i` that is not part of a solution modifier.
fn skip_modifiers(tokens: &[Token], mut i: usize) -> usize {
    while let Some(t) = tokens.get(i) {
        let is_modifier = match t.kind {
            TokenKind::Keyword => MODIFIER_WORDS.iter().any(|w| t.is_keyword(w)),
            TokenKind::Variable | TokenKind::Number => true,
            _ => false,
        };
        if is_modifier {
            i += 1;
        } else if t.is_punct("(") {
            let mut depth = 0usize;
            while let Some(p) = tokens.get(i) {
                if p.is_punct("(") {
                    depth += 1;
                } else if p.is_punct(")") {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                i += 1;
            }
            if i >= tokens.len() {
                return i;
            }
            i += 1;
        } else {
            break;
        }
    }
    i
}
