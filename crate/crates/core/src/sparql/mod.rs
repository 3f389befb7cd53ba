//! SPARQL text utilities: cleaning, tokenizing, structural validation,
//! prefix management and query-form detection.

mod clean;
mod lexer;
mod prefixes;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clean::{clean, clean_with, CleanOptions};
pub use lexer::{detokenize, tokenize, LexError, Token, TokenKind};
pub use prefixes::{ensure_prefixes, EnsurePrefixesError, PrefixTable, PrefixTableError};
pub use validate::{validate, validate_with, Issue, IssueCode, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryForm {
    Select,
    Ask,
    Construct,
    Describe,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryFormError {
    #[error("NO_QUERY_FORM: no SELECT, ASK, CONSTRUCT or DESCRIBE keyword")]
    NoQueryForm,
    #[error(transparent)]
    Lex(#[from] LexError),
}

impl QueryForm {
    pub(crate) fn from_tokens(tokens: &[Token]) -> Option<Self> {
        tokens.iter().filter(|t| t.kind == TokenKind::Keyword).find_map(|t| {
            match t.text.to_ascii_uppercase().as_str() {
                "SELECT" => Some(QueryForm::Select),
                "ASK" => Some(QueryForm::Ask),
                "CONSTRUCT" => Some(QueryForm::Construct),
                "DESCRIBE" => Some(QueryForm::Describe),
                _ => None,
            }
        })
    }
}

impl fmt::Display for QueryForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            QueryForm::Select => "select",
            QueryForm::Ask => "ask",
            QueryForm::Construct => "construct",
            QueryForm::Describe => "describe",
        };
        f.write_str(s)
    }
}

/// The first query-form keyword outside comments and literals.
pub fn query_form(text: &str) -> Result<QueryForm, QueryFormError> {
    let tokens = tokenize(text)?;
    QueryForm::from_tokens(&tokens).ok_or(QueryFormError::NoQueryForm)
}
