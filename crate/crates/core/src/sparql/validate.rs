//! Structural lint for SPARQL text.
//!
//! This is not a grammar. It looks for the punctuation defects that
//! generated queries actually exhibit: unbalanced delimiters, semicolons
//! with nothing after them, triples run together without a separator, and
//! prefixes nobody declared. The endpoint stays the final authority on
//! syntax.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::lexer::{tokenize, Token, TokenKind};
use super::prefixes::{declared_prefixes, used_prefixes, PrefixTable};
use super::QueryForm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    EmptyQuery,
    UnterminatedLiteral,
    UnbalancedBrace,
    UnbalancedParen,
    UnbalancedBracket,
    DanglingSemicolon,
    MissingDot,
    UndeclaredPrefix,
    NoQueryForm,
}

impl IssueCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            IssueCode::EmptyQuery => "EMPTY_QUERY",
            IssueCode::UnterminatedLiteral => "UNTERMINATED_LITERAL",
            IssueCode::UnbalancedBrace => "UNBALANCED_BRACE",
            IssueCode::UnbalancedParen => "UNBALANCED_PAREN",
            IssueCode::UnbalancedBracket => "UNBALANCED_BRACKET",
            IssueCode::DanglingSemicolon => "DANGLING_SEMICOLON",
            IssueCode::MissingDot => "MISSING_DOT",
            IssueCode::UndeclaredPrefix => "UNDECLARED_PREFIX",
            IssueCode::NoQueryForm => "NO_QUERY_FORM",
        }
    }
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub code: IssueCode,
    pub message: String,
    pub offset: usize,
}

/// Outcome of [`validate`]. `issues` holds hard findings and decides `ok`;
/// heuristic findings (currently only `MISSING_DOT`) go to `warnings`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
    #[serde(default)]
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    fn from_findings(mut issues: Vec<Issue>, mut warnings: Vec<Issue>) -> Self {
        issues.sort_by_key(|i| (i.offset, i.code));
        warnings.sort_by_key(|i| (i.offset, i.code));
        Self { ok: issues.is_empty(), issues, warnings }
    }

    pub fn has(&self, code: IssueCode) -> bool {
        self.issues.iter().chain(&self.warnings).any(|i| i.code == code)
    }

    pub fn hard_codes(&self) -> Vec<IssueCode> {
        let mut codes: Vec<_> = self.issues.iter().map(|i| i.code).collect();
        codes.dedup();
        codes
    }
}

/// Validate against the bundled ORKG prefix table.
pub fn validate(text: &str) -> ValidationReport {
    validate_with(text, &PrefixTable::default())
}

pub fn validate_with(text: &str, known: &PrefixTable) -> ValidationReport {
    let issue = |code, message: String, offset| Issue { code, message, offset };
    if text.trim().is_empty() {
        return ValidationReport::from_findings(
            vec![issue(IssueCode::EmptyQuery, "query is empty".into(), 0)],
            Vec::new(),
        );
    }
    let tokens = match tokenize(text) {
        Ok(t) => t,
        Err(e) => {
            return ValidationReport::from_findings(
                vec![issue(IssueCode::UnterminatedLiteral, e.to_string(), e.offset())],
                Vec::new(),
            )
        }
    };
    if tokens.is_empty() {
        return ValidationReport::from_findings(
            vec![issue(IssueCode::EmptyQuery, "query contains only comments".into(), 0)],
            Vec::new(),
        );
    }

    let mut issues = check_delimiters(&tokens);
    issues.extend(check_semicolons(&tokens));

    let declared = declared_prefixes(&tokens);
    for (prefix, offset) in used_prefixes(&tokens) {
        if !declared.contains(&prefix) && !known.contains(&prefix) {
            issues.push(issue(
                IssueCode::UndeclaredPrefix,
                format!("prefix `{prefix}:` is neither declared nor known"),
                offset,
            ));
        }
    }

    if QueryForm::from_tokens(&tokens).is_none() {
        issues.push(issue(IssueCode::NoQueryForm, "no SELECT, ASK, CONSTRUCT or DESCRIBE keyword".into(), 0));
    }

    ValidationReport::from_findings(issues, check_triple_separators(&tokens))
}

fn delimiter_code(c: &str) -> IssueCode {
    match c {
        "{" | "}" => IssueCode::UnbalancedBrace,
        "(" | ")" => IssueCode::UnbalancedParen,
        _ => IssueCode::UnbalancedBracket,
    }
}

fn opener_for(close: &str) -> &'static str {
    match close {
        "}" => "{",
        ")" => "(",
        _ => "[",
    }
}

fn check_delimiters(tokens: &[Token]) -> Vec<Issue> {
    let mut issues = Vec::new();
    let mut stack: Vec<&Token> = Vec::new();
    let unclosed = |t: &Token| Issue {
        code: delimiter_code(&t.text),
        message: format!("`{}` is never closed", t.text),
        offset: t.offset,
    };
    for tok in tokens.iter().filter(|t| t.kind == TokenKind::Punct) {
        match tok.text.as_str() {
            "{" | "(" | "[" => stack.push(tok),
            close @ ("}" | ")" | "]") => {
                let open = opener_for(close);
                if let Some(depth) = stack.iter().rposition(|t| t.text == open) {
                    for t in stack.drain(depth + 1..) {
                        issues.push(unclosed(t));
                    }
                    stack.pop();
                } else {
                    issues.push(Issue {
                        code: delimiter_code(close),
                        message: format!("`{close}` has no matching `{open}`"),
                        offset: tok.offset,
                    });
                }
            }
            _ => {}
        }
    }
    issues.extend(stack.into_iter().map(unclosed));
    issues
}

fn check_semicolons(tokens: &[Token]) -> Vec<Issue> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_punct(";"))
        .filter(|(i, _)| match tokens.get(i + 1) {
            None => true,
            Some(next) => {
                next.kind == TokenKind::Punct && matches!(next.text.as_str(), "}" | "." | ";" | "," | ")" | "]")
            }
        })
        .map(|(_, t)| Issue {
            code: IssueCode::DanglingSemicolon,
            message: "`;` is not followed by a predicate".into(),
            offset: t.offset,
        })
        .collect()
}

fn is_term(tok: &Token) -> bool {
    match tok.kind {
        TokenKind::Variable | TokenKind::Iri | TokenKind::PrefixedName | TokenKind::Literal | TokenKind::Number => true,
        TokenKind::Keyword => ["a", "true", "false"].iter().any(|w| tok.text.eq_ignore_ascii_case(w)),
        TokenKind::Punct => false,
    }
}

/// Keywords after which the tokens up to the next brace are not triples.
const NON_PATTERN_KEYWORDS: [&str; 13] = [
    "SELECT",
    "ASK",
    "CONSTRUCT",
    "DESCRIBE",
    "GROUP",
    "ORDER",
    "HAVING",
    "LIMIT",
    "OFFSET",
    "GRAPH",
    "SERVICE",
    "FROM",
    "VALUES",
];

struct Group {
    expected: u8,
    seen: u8,
}

/// Heuristic: inside a group pattern, a triple has three terms after `.`,
/// two after `;` and one after `,`. A term beyond that means a separator
/// went missing.
fn check_triple_separators(tokens: &[Token]) -> Vec<Issue> {
    let mut warnings = Vec::new();
    let mut groups: Vec<Group> = Vec::new();
    let mut paren_depth = 0usize;
    let mut bracket_depth = 0usize;
    let mut skip_to_brace = false;
    let mut values_pending = false;
    let mut data_block_depth = 0usize;
    let mut joined = false;

    for tok in tokens {
        if data_block_depth > 0 {
            if tok.is_punct("{") {
                data_block_depth += 1;
            } else if tok.is_punct("}") {
                data_block_depth -= 1;
            }
            continue;
        }
        match (tok.kind, tok.text.as_str()) {
            (TokenKind::Punct, "{") => {
                skip_to_brace = false;
                if values_pending {
                    values_pending = false;
                    data_block_depth = 1;
                } else {
                    groups.push(Group { expected: 3, seen: 0 });
                }
                paren_depth = 0;
                continue;
            }
            (TokenKind::Punct, "}") => {
                skip_to_brace = false;
                groups.pop();
                if let Some(g) = groups.last_mut() {
                    *g = Group { expected: 3, seen: 0 };
                }
                paren_depth = 0;
                continue;
            }
            (TokenKind::Punct, "(") => paren_depth += 1,
            (TokenKind::Punct, ")") => paren_depth = paren_depth.saturating_sub(1),
            _ => {}
        }
        if paren_depth > 0 || skip_to_brace {
            continue;
        }
        let Some(group) = groups.last_mut() else {
            if tok.is_keyword("VALUES") {
                values_pending = true;
            }
            continue;
        };
        if bracket_depth > 0 {
            if tok.is_punct("[") {
                bracket_depth += 1;
            } else if tok.is_punct("]") {
                bracket_depth -= 1;
            }
            continue;
        }
        match tok.kind {
            TokenKind::Punct => match tok.text.as_str() {
                "." => *group = Group { expected: 3, seen: 0 },
                ";" => *group = Group { expected: 2, seen: 0 },
                "," => *group = Group { expected: 1, seen: 0 },
                "/" | "|" | "^^" => joined = true,
                "[" => {
                    bracket_depth = 1;
                    count_term(group, tok, &mut joined, &mut warnings);
                }
                _ => {}
            },
            TokenKind::Keyword if !is_term(tok) => {
                *group = Group { expected: 3, seen: 0 };
                joined = false;
                if tok.is_keyword("VALUES") {
                    values_pending = true;
                    skip_to_brace = true;
                } else if NON_PATTERN_KEYWORDS.iter().any(|k| tok.is_keyword(k)) {
                    skip_to_brace = true;
                }
            }
            _ => count_term(group, tok, &mut joined, &mut warnings),
        }
    }
    warnings
}

fn count_term(group: &mut Group, tok: &Token, joined: &mut bool, warnings: &mut Vec<Issue>) {
    if std::mem::take(joined) {
        return;
    }
    if group.seen >= group.expected {
        warnings.push(Issue {
            code: IssueCode::MissingDot,
            message: format!("`{}` starts a new triple without a preceding `.`", tok.text),
            offset: tok.offset,
        });
        *group = Group { expected: 3, seen: 1 };
    } else {
        group.seen += 1;
    }
}
