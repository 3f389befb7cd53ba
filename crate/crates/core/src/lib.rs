//! Few-shot SPARQL generation over scholarly knowledge graphs.
//!
//! A question is answered by retrieving the most similar training pairs,
//! rendering them into a few-shot prompt, asking an LLM for a query,
//! extracting and cleaning that query, and running it against a SPARQL
//! endpoint. The evaluation module scores answer sets against gold.

pub mod answer;
pub mod corpus;
pub mod endpoint;
pub mod evaluation;
pub mod exec;
pub mod fixtures;
pub mod generation;
pub mod pipeline;
pub mod prompt;
pub mod retrieval;
pub mod sparql;

mod http;

pub use answer::{AnswerSet, Normalization};
pub use corpus::{Corpus, QaPair, Split};
pub use exec::Execution;
pub use http::json_path;
