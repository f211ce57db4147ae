//! Model backends: the trait the rollout drives, a scripted replay backend
//! and a closure-backed backend for rule-based policies.

use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::query::Phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    /// Generation halted on `</search>`.
    StopSequence,
    EndOfSequence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub text: String,
    pub finish: FinishReason,
}

impl Generation {
    /// Applies stop-sequence semantics to raw text: anything after the first
    /// `</search>` is discarded.
    pub fn from_raw(raw: &str) -> Self {
        let close = Phase::Search.close_tag();
        match raw.find(close) {
            Some(i) => Generation {
                text: raw[..i + close.len()].to_string(),
                finish: FinishReason::StopSequence,
            },
            None => Generation {
                text: raw.to_string(),
                finish: FinishReason::EndOfSequence,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_total_tokens: usize,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.7,
            max_total_tokens: 8192,
        }
    }
}

/// One generation call within a rollout.
#[derive(Debug, Clone)]
pub struct GenerationRequest<'a> {
    pub prompt: &'a str,
    /// Everything generated or injected after the prompt so far.
    pub transcript: &'a str,
    /// Zero-based index of this generation within the rollout.
    pub step: usize,
    pub temperature: f64,
    /// Remaining token budget.
    pub max_tokens: usize,
    pub stop: &'a [&'a str],
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("ScriptExhausted: generation {requested} requested but the script has {available} steps")]
    ScriptExhausted { requested: usize, available: usize },
    #[error("ScriptInvalid: {0}")]
    ScriptInvalid(String),
    #[error("Transport: {0}")]
    Transport(String),
    #[error("Refusal: {0}")]
    Refusal(String),
    #[error("Protocol: {0}")]
    Protocol(String),
    #[error("Length: the backend stopped at its token limit")]
    Length,
}

impl BackendError {
    pub fn kind(&self) -> &'static str {
        match self {
            BackendError::ScriptExhausted { .. } => "ScriptExhausted",
            BackendError::ScriptInvalid(_) => "ScriptInvalid",
            BackendError::Transport(_) => "Transport",
            BackendError::Refusal(_) => "Refusal",
            BackendError::Protocol(_) => "Protocol",
            BackendError::Length => "Length",
        }
    }
}

pub trait ModelBackend: Send + Sync {
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<Generation, BackendError>;
}

impl<B: ModelBackend + ?Sized> ModelBackend for &B {
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<Generation, BackendError> {
        (**self).generate(request)
    }
}

impl<B: ModelBackend + ?Sized> ModelBackend for Box<B> {
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<Generation, BackendError> {
        (**self).generate(request)
    }
}

/// Replays generation `i` at rollout step `i`.
///
/// Script files hold numbered blocks:
///
/// ```text
/// --- step 1 ---
/// <think>...</think><search>mode=local, hop=1, query="..."</search>
/// --- step 2 ---
/// <think>...</think><answer>Movies</answer>
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedBackend {
    steps: Vec<Generation>,
}

impl ScriptedBackend {
    pub fn new<S: AsRef<str>>(steps: impl IntoIterator<Item = S>) -> Self {
        ScriptedBackend {
            steps: steps
                .into_iter()
                .map(|s| Generation::from_raw(s.as_ref()))
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, BackendError> {
        let mut steps: Vec<String> = Vec::new();
        let mut current: Option<Vec<&str>> = None;
        for line in text.lines() {
            if let Some(n) = step_header(line) {
                if n != steps.len() + usize::from(current.is_some()) + 1 {
                    return Err(BackendError::ScriptInvalid(format!(
                        "step {n} out of order"
                    )));
                }
                if let Some(lines) = current.take() {
                    steps.push(lines.join("\n").trim_end().to_string());
                }
                current = Some(Vec::new());
            } else if let Some(lines) = current.as_mut() {
                lines.push(line);
            } else if !line.trim().is_empty() {
                return Err(BackendError::ScriptInvalid(
                    "text before the first '--- step 1 ---' header".into(),
                ));
            }
        }
        if let Some(lines) = current.take() {
            steps.push(lines.join("\n").trim_end().to_string());
        }
        if steps.is_empty() {
            return Err(BackendError::ScriptInvalid("script has no steps".into()));
        }
        Ok(Self::new(steps))
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path)
            .map_err(|e| BackendError::ScriptInvalid(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn to_script(&self) -> String {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, g)| format!("--- step {} ---\n{}\n", i + 1, g.text))
            .collect()
    }
}

fn step_header(line: &str) -> Option<usize> {
    line.trim()
        .strip_prefix("--- step ")?
        .strip_suffix(" ---")?
        .trim()
        .parse()
        .ok()
}

impl ModelBackend for ScriptedBackend {
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<Generation, BackendError> {
        self.steps
            .get(request.step)
            .cloned()
            .ok_or(BackendError::ScriptExhausted {
                requested: request.step + 1,
                available: self.steps.len(),
            })
    }
}

/// Backend driven by a function of the request, for deterministic
/// rule-based policies.
pub struct FnBackend<F>(pub F);

impl<F> ModelBackend for FnBackend<F>
where
    F: Fn(&GenerationRequest<'_>) -> Result<Generation, BackendError> + Send + Sync,
{
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<Generation, BackendError> {
        (self.0)(request)
    }
}
