use serde::Serialize;

use super::{extract_spans, Phase, QueryError, TaskKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Answer {
    ClassLabel(String),
    Link(bool),
}

fn normalize(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Reads the last complete `<answer>` span and resolves it against the task.
pub fn parse_answer(transcript: &str, task: &TaskKind) -> Result<Answer, QueryError> {
    let span = extract_spans(transcript)
        .into_iter()
        .rev()
        .find(|s| s.phase == Phase::Answer && s.complete)
        .ok_or(QueryError::NoAnswerBlock)?;
    resolve_answer(&span.text, task)
}

/// Resolves the contents of one answer span against the task.
pub(crate) fn resolve_answer(raw: &str, task: &TaskKind) -> Result<Answer, QueryError> {
    let raw = raw.trim();
    match task {
        TaskKind::NodeClassification { classes } => resolve_class(raw, classes).map(Answer::ClassLabel),
        TaskKind::LinkPrediction => resolve_link(raw).map(Answer::Link),
    }
}

/// Exact (case- and whitespace-insensitive) match first, then a unique
/// substring match in either direction.
fn resolve_class(raw: &str, classes: &[String]) -> Result<String, QueryError> {
    let answer = normalize(raw);
    if answer.is_empty() {
        return Err(QueryError::UnresolvableClass(raw.to_string()));
    }
    if let Some(c) = classes.iter().find(|c| normalize(c) == answer) {
        return Ok(c.clone());
    }
    let mut hits = classes.iter().filter(|c| {
        let c = normalize(c);
        !c.is_empty() && (answer.contains(&c) || c.contains(&answer))
    });
    match (hits.next(), hits.next()) {
        (Some(c), None) => Ok(c.clone()),
        _ => Err(QueryError::UnresolvableClass(raw.to_string())),
    }
}

fn resolve_link(raw: &str) -> Result<bool, QueryError> {
    let answer = normalize(raw);
    let first = answer
        .split(|c: char| !c.is_alphanumeric())
        .find(|w| !w.is_empty())
        .unwrap_or("");
    match first {
        "yes" | "true" | "1" | "connected" | "linked" => Ok(true),
        "no" | "false" | "0" | "unconnected" | "not" => Ok(false),
        _ => Err(QueryError::UnresolvableLink(raw.to_string())),
    }
}
