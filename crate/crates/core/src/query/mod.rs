//! Rollout tag grammar, graph-oriented search queries, prompts and answers.

mod answer;
mod parser;
mod prompt;
mod spans;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use answer::{parse_answer, Answer};
pub use parser::parse_search_block;
pub use prompt::{render_prompt, PromptContext, PromptTemplate, TemplateKind, SEARCH_SCHEMA};
pub use spans::{extract_spans, phase_segments, Phase, TaggedSpan};

pub(crate) use answer::resolve_answer;
pub(crate) use spans::scan_spans;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("EmptyQueryText: search block has no usable query text")]
    EmptyQueryText,
    #[error("MissingField: {0}")]
    MissingField(String),
    #[error("NoAnswerBlock: transcript has no complete <answer> span")]
    NoAnswerBlock,
    #[error("UnresolvableClass: '{0}' matches no single class")]
    UnresolvableClass(String),
    #[error("UnresolvableLink: '{0}' is neither yes nor no")]
    UnresolvableLink(String),
    #[error("TemplateInvalid: {0}")]
    TemplateInvalid(String),
}

impl QueryError {
    pub fn kind(&self) -> &'static str {
        match self {
            QueryError::EmptyQueryText => "EmptyQueryText",
            QueryError::MissingField(_) => "MissingField",
            QueryError::NoAnswerBlock => "NoAnswerBlock",
            QueryError::UnresolvableClass(_) => "UnresolvableClass",
            QueryError::UnresolvableLink(_) => "UnresolvableLink",
            QueryError::TemplateInvalid(_) => "TemplateInvalid",
        }
    }
}

/// Traversal policy: hop-by-hop recursive expansion (R) or planner-chosen
/// scopes (F).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Traversal {
    R,
    F,
}

impl Traversal {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "R" => Some(Traversal::R),
            "F" => Some(Traversal::F),
            _ => None,
        }
    }
}

impl fmt::Display for Traversal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Traversal::R => "R",
            Traversal::F => "F",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SearchSpace {
    Local(u8),
    Global,
    Attribute,
}

impl fmt::Display for SearchSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchSpace::Local(h) => write!(f, "local(hop={h})"),
            SearchSpace::Global => f.write_str("global"),
            SearchSpace::Attribute => f.write_str("attribute"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub enum AnchorSelector {
    #[default]
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct StructuredQuery {
    pub space: SearchSpace,
    pub text: String,
    pub anchor: AnchorSelector,
}

impl StructuredQuery {
    pub fn new(space: SearchSpace, text: impl Into<String>) -> Self {
        StructuredQuery {
            space,
            text: text.into(),
            anchor: AnchorSelector::First,
        }
    }

    pub fn with_anchor(mut self, anchor: AnchorSelector) -> Self {
        self.anchor = anchor;
        self
    }

    /// Canonical flat form, e.g. `mode=local, hop=1, query="gibbs sampler"`.
    pub fn to_dsl(&self) -> String {
        let mut out = match self.space {
            SearchSpace::Local(h) => format!("mode=local, hop={h}"),
            SearchSpace::Global => "mode=global".to_string(),
            SearchSpace::Attribute => "mode=attribute".to_string(),
        };
        if self.anchor == AnchorSelector::Second {
            out.push_str(", anchor=b");
        }
        out.push_str(", query=\"");
        for c in self.text.chars() {
            if c == '"' || c == '\\' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push('"');
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum FallbackReason {
    MissingMode,
    UnknownMode(String),
    HopOutOfRange(String),
    MissingHop,
    /// The block had no `key=value` structure at all.
    Unstructured,
}

/// Records that a malformed structural field was replaced by `Local(1)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FallbackEvent {
    pub reason: FallbackReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParsedSearch {
    pub query: StructuredQuery,
    pub fallback: Option<FallbackEvent>,
}

/// What the rollout is asked to predict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum TaskKind {
    NodeClassification { classes: Vec<String> },
    LinkPrediction,
}
