//! SPARQL 1.1 Protocol client.
//!
//! Queries are POSTed as `application/x-www-form-urlencoded` with
//! `Accept: application/sparql-results+json`. Every execution ends in
//! exactly one of: an answer set, `SYNTAX_REJECTED`, `TIMEOUT`, `TRANSPORT`
//! or `MALFORMED_RESULTS`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::{results_from_value, AnswerSet, Normalization, ResultsError};
use crate::http::{self, is_transient_status, with_retries, Attempt, HttpFailure};
use crate::sparql::{clean, query_form, tokenize, QueryForm};

/// Public ORKG endpoint used for live runs.
pub const ORKG_ENDPOINT: &str = "https://ltdemos.informatik.uni-hamburg.de/orkg/sparql";

pub const RESULTS_MEDIA_TYPE: &str = "application/sparql-results+json";

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointConfig {
    pub url: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub retry_base_delay: Duration,
    /// Appended as `LIMIT n` to SELECT queries that carry no LIMIT.
    pub result_limit_guard: Option<u64>,
    pub normalization: Normalization,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            timeout: Duration::from_secs(60),
            max_retries: 2,
            retry_base_delay: Duration::from_millis(500),
            result_limit_guard: None,
            normalization: Normalization::Lenient,
        }
    }
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self::new(ORKG_ENDPOINT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExecuteErrorKind {
    SyntaxRejected,
    Timeout,
    Transport,
    MalformedResults,
}

impl ExecuteErrorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExecuteErrorKind::SyntaxRejected => "SYNTAX_REJECTED",
            ExecuteErrorKind::Timeout => "TIMEOUT",
            ExecuteErrorKind::Transport => "TRANSPORT",
            ExecuteErrorKind::MalformedResults => "MALFORMED_RESULTS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecuteError {
    #[error("endpoint rejected the query: {0}")]
    SyntaxRejected(String),
    #[error("endpoint timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed results: {0}")]
    MalformedResults(String),
}

impl ExecuteError {
    pub fn kind(&self) -> ExecuteErrorKind {
        match self {
            ExecuteError::SyntaxRejected(_) => ExecuteErrorKind::SyntaxRejected,
            ExecuteError::Timeout => ExecuteErrorKind::Timeout,
            ExecuteError::Transport(_) => ExecuteErrorKind::Transport,
            ExecuteError::MalformedResults(_) => ExecuteErrorKind::MalformedResults,
        }
    }
}

impl From<ResultsError> for ExecuteError {
    fn from(e: ResultsError) -> Self {
        ExecuteError::MalformedResults(e.to_string())
    }
}

/// Anything that can run a query and return an answer set.
pub trait QueryExecutor: Send + Sync {
    fn execute(&self, query: &str) -> Result<AnswerSet, ExecuteError>;
}

/// Parse a results payload for a query of the given form. SELECT expects
/// bindings and ASK expects a boolean.
pub fn parse_results(payload: &[u8], form: QueryForm, mode: Normalization) -> Result<AnswerSet, ExecuteError> {
    let doc: serde_json::Value =
        serde_json::from_slice(payload).map_err(|e| ExecuteError::from(ResultsError::Json(e.to_string())))?;
    let answers = results_from_value(&doc, mode)?;
    check_form(answers, Some(form))
}

fn check_form(answers: AnswerSet, form: Option<QueryForm>) -> Result<AnswerSet, ExecuteError> {
    match (form, &answers) {
        (Some(QueryForm::Ask), AnswerSet::Bindings { .. }) => {
            Err(ExecuteError::MalformedResults("ASK query returned bindings".into()))
        }
        (Some(QueryForm::Select), AnswerSet::Boolean { .. }) => {
            Err(ExecuteError::MalformedResults("SELECT query returned a boolean".into()))
        }
        (Some(QueryForm::Construct | QueryForm::Describe), _) => {
            Err(ExecuteError::MalformedResults("graph-form results are not supported".into()))
        }
        _ => Ok(answers),
    }
}

/// Append ` LIMIT n` to a SELECT query without a LIMIT clause.
pub fn apply_limit_guard(query: &str, guard: Option<u64>) -> String {
    let Some(n) = guard else {
        return query.to_string();
    };
    let Ok(tokens) = tokenize(query) else {
        return query.to_string();
    };
    let is_select = query_form(query) == Ok(QueryForm::Select);
    if !is_select || tokens.iter().any(|t| t.is_keyword("LIMIT")) {
        return query.to_string();
    }
    format!("{} LIMIT {n}", query.trim_end())
}

/// Substrings in a server error body that mark a query parse failure.
const SYNTAX_MARKERS: [&str; 4] = ["syntax", "parse", "lexical", "malformed query"];

fn looks_like_syntax_error(body: &str) -> bool {
    let lower = body.to_ascii_lowercase();
    SYNTAX_MARKERS.iter().any(|m| lower.contains(m))
}

pub struct SparqlEndpoint {
    config: EndpointConfig,
    agent: ureq::Agent,
}

impl SparqlEndpoint {
    pub fn new(config: EndpointConfig) -> Self {
        let agent = http::agent(config.timeout);
        Self { config, agent }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn attempt(&self, query: &str) -> Result<Vec<u8>, Attempt<ExecuteError>> {
        let result =
            self.agent.post(&self.config.url).header("Accept", RESULTS_MEDIA_TYPE).send_form([("query", query)]);
        let reply = http::read_reply(result).map_err(|f| match f {
            HttpFailure::Timeout => Attempt::Retry(ExecuteError::Timeout),
            HttpFailure::Transport(m) => Attempt::Retry(ExecuteError::Transport(m)),
        })?;
        if (200..300).contains(&reply.status) {
            return Ok(reply.body);
        }
        let body = String::from_utf8_lossy(&reply.body);
        let summary = format!("HTTP {}: {}", reply.status, body.trim().chars().take(300).collect::<String>());
        if reply.status == 400 || (reply.status >= 500 && looks_like_syntax_error(&body)) {
            Err(Attempt::Fail(ExecuteError::SyntaxRejected(summary)))
        } else if is_transient_status(reply.status) {
            Err(Attempt::Retry(ExecuteError::Transport(summary)))
        } else {
            Err(Attempt::Fail(ExecuteError::Transport(summary)))
        }
    }
}

impl QueryExecutor for SparqlEndpoint {
    fn execute(&self, query: &str) -> Result<AnswerSet, ExecuteError> {
        let query = apply_limit_guard(&clean(query), self.config.result_limit_guard);
        let (body, _) = with_retries(self.config.max_retries, self.config.retry_base_delay, || self.attempt(&query))
            .map_err(|(e, _)| e)?;
        let doc: serde_json::Value =
            serde_json::from_slice(&body).map_err(|e| ExecuteError::from(ResultsError::Json(e.to_string())))?;
        let answers = results_from_value(&doc, self.config.normalization)?;
        check_form(answers, query_form(&query).ok())
    }
}
