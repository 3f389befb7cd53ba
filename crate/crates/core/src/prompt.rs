//! Few-shot prompt rendering.
//!
//! Retrieved question/query pairs are rendered most-similar-first as
//! `Question: ...` / `Sparql: ...` line pairs and substituted, together with
//! the test question, into a template holding the placeholders `{example}`
//! and `{test question}`. Rendering is byte-deterministic.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Corpus, QaPair};
use crate::retrieval::Neighbor;
use crate::sparql::clean;

pub const EXAMPLE_PLACEHOLDER: &str = "{example}";
pub const QUESTION_PLACEHOLDER: &str = "{test question}";

/// Version tag of the bundled template.
pub const CANONICAL_TEMPLATE_VERSION: &str = "few_shot_v1";
const CANONICAL_TEMPLATE: &str = include_str!("../templates/few_shot_v1.txt");

/// Shot count used when none is configured.
pub const DEFAULT_SHOTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("no examples to render")]
    NoExamples,
    #[error("example `{id}`: query must be cleaned first (contains {what})")]
    UncleanExample { id: String, what: &'static str },
    #[error("test question is empty")]
    EmptyQuestion,
    #[error("template must contain `{placeholder}` exactly once (found {count})")]
    Placeholder { placeholder: &'static str, count: usize },
    #[error("reading template: {0}")]
    Io(String),
    #[error("example `{0}` is not in the training corpus")]
    UnknownExample(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::canonical()
    }
}

impl PromptTemplate {
    pub fn canonical() -> Self {
        Self::parse(CANONICAL_TEMPLATE).expect("bundled template is valid")
    }

    pub fn parse(text: &str) -> Result<Self, PromptError> {
        for placeholder in [EXAMPLE_PLACEHOLDER, QUESTION_PLACEHOLDER] {
            let count = text.matches(placeholder).count();
            if count != 1 {
                return Err(PromptError::Placeholder { placeholder, count });
            }
        }
        Ok(Self { text: text.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|e| PromptError::Io(e.to_string()))?;
        Self::parse(&text)
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// Substitute both placeholders in a single pass, so placeholder text
    /// inside examples or the question is never expanded.
    fn fill(&self, examples: &str, question: &str) -> String {
        let e = self.text.find(EXAMPLE_PLACEHOLDER).expect("checked at parse");
        let q = self.text.find(QUESTION_PLACEHOLDER).expect("checked at parse");
        let mut slots = [(e, EXAMPLE_PLACEHOLDER, examples), (q, QUESTION_PLACEHOLDER, question)];
        slots.sort_by_key(|s| s.0);
        let mut out = String::with_capacity(self.text.len() + examples.len() + question.len());
        let mut cursor = 0;
        for (pos, placeholder, value) in slots {
            out.push_str(&self.text[cursor..pos]);
            out.push_str(value);
            cursor = pos + placeholder.len();
        }
        out.push_str(&self.text[cursor..]);
        out
    }
}

/// One retrieved example. The query must already be cleaned: a single line
/// with no runs of spaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleBlock {
    pub id: String,
    pub question: String,
    pub sparql: String,
}

impl ExampleBlock {
    pub fn new(
        id: impl Into<String>,
        question: impl Into<String>,
        sparql: impl Into<String>,
    ) -> Result<Self, PromptError> {
        let block = Self { id: id.into(), question: question.into(), sparql: sparql.into() };
        block.check()?;
        Ok(block)
    }

    /// Build from a dataset pair, cleaning its gold query.
    pub fn from_pair(pair: &QaPair) -> Self {
        Self { id: pair.id.clone(), question: pair.question.clone(), sparql: clean(&pair.sparql) }
    }

    fn check(&self) -> Result<(), PromptError> {
        let what = if self.sparql.contains(['\n', '\r']) {
            Some("a newline")
        } else if self.sparql.contains("  ") {
            Some("a run of spaces")
        } else {
            None
        };
        match what {
            Some(what) => Err(PromptError::UncleanExample { id: self.id.clone(), what }),
            None => Ok(()),
        }
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedExamples {
    pub text: String,
    pub blocks: Vec<ExampleBlock>,
}

/// Render blocks in the order given (rank order).
pub fn render_examples(blocks: &[ExampleBlock]) -> Result<RenderedExamples, PromptError> {
    if blocks.is_empty() {
        return Err(PromptError::NoExamples);
    }
    let mut text = String::new();
    for b in blocks {
        b.check()?;
        text.push_str("Question: ");
        text.push_str(&one_line(&b.question));
        text.push_str("\nSparql: ");
        text.push_str(&b.sparql);
        text.push('\n');
    }
    Ok(RenderedExamples { text, blocks: blocks.to_vec() })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotPrompt {
    pub text: String,
    pub shot_count: usize,
    pub example_ids: Vec<String>,
    pub test_question: String,
    pub examples: Vec<ExampleBlock>,
}

impl FewShotPrompt {
    /// Hex SHA-256 of the prompt text.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }
}

pub fn build_prompt(
    template: &PromptTemplate,
    examples: &RenderedExamples,
    test_question: &str,
) -> Result<FewShotPrompt, PromptError> {
    let question = one_line(test_question);
    if question.is_empty() {
        return Err(PromptError::EmptyQuestion);
    }
    Ok(FewShotPrompt {
        text: template.fill(&examples.text, &question),
        shot_count: examples.blocks.len(),
        example_ids: examples.blocks.iter().map(|b| b.id.clone()).collect(),
        test_question: question,
        examples: examples.blocks.clone(),
    })
}

/// The first `shots` neighbours as example blocks, most similar first.
pub fn select_examples(train: &Corpus, neighbors: &[Neighbor], shots: usize) -> Result<Vec<ExampleBlock>, PromptError> {
    neighbors
        .iter()
        .take(shots)
        .map(|n| {
            train
                .pairs
                .get(n.position)
                .filter(|p| p.id == n.pair_id)
                .or_else(|| train.get(&n.pair_id))
                .map(ExampleBlock::from_pair)
                .ok_or_else(|| PromptError::UnknownExample(n.pair_id.clone()))
        })
        .collect()
}
