use std::ops::Range;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Think,
    Search,
    Information,
    Answer,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Think, Phase::Search, Phase::Information, Phase::Answer];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Think => "think",
            Phase::Search => "search",
            Phase::Information => "information",
            Phase::Answer => "answer",
        }
    }

    pub fn open_tag(self) -> &'static str {
        match self {
            Phase::Think => "<think>",
            Phase::Search => "<search>",
            Phase::Information => "<information>",
            Phase::Answer => "<answer>",
        }
    }

    pub fn close_tag(self) -> &'static str {
        match self {
            Phase::Think => "</think>",
            Phase::Search => "</search>",
            Phase::Information => "</information>",
            Phase::Answer => "</answer>",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaggedSpan {
    pub phase: Phase,
    /// Contents between the tags.
    pub text: String,
    /// Byte range of the whole span, tags included.
    pub range: Range<usize>,
    /// False when the closing tag never arrived.
    pub complete: bool,
}

/// All well-formed spans in order; an unclosed trailing tag yields a partial span.
pub fn extract_spans(transcript: &str) -> Vec<TaggedSpan> {
    scan_spans(transcript, |_| true)
}

/// Span scanner. `<information>` opens a span only where `trust_information`
/// accepts its byte offset; elsewhere it is plain text.
pub(crate) fn scan_spans(text: &str, trust_information: impl Fn(usize) -> bool) -> Vec<TaggedSpan> {
    let mut spans = Vec::new();
    let mut pos = 0;
    while pos < text.len() {
        let next = Phase::ALL
            .iter()
            .filter_map(|&phase| {
                let tag = phase.open_tag();
                let mut from = pos;
                while let Some(off) = text[from..].find(tag) {
                    let at = from + off;
                    if phase != Phase::Information || trust_information(at) {
                        return Some((at, phase));
                    }
                    from = at + tag.len();
                }
                None
            })
            .min_by_key(|&(at, _)| at);
        let Some((start, phase)) = next else { break };
        let body_start = start + phase.open_tag().len();
        match text[body_start..].find(phase.close_tag()) {
            Some(off) => {
                let body_end = body_start + off;
                let end = body_end + phase.close_tag().len();
                spans.push(TaggedSpan {
                    phase,
                    text: text[body_start..body_end].to_string(),
                    range: start..end,
                    complete: true,
                });
                pos = end;
            }
            None => {
                spans.push(TaggedSpan {
                    phase,
                    text: text[body_start..].to_string(),
                    range: start..text.len(),
                    complete: false,
                });
                break;
            }
        }
    }
    spans
}

/// Partition of the transcript into phase-attributed ranges. Text outside
/// any span counts as thinking.
pub fn phase_segments(text: &str, spans: &[TaggedSpan]) -> Vec<(Phase, Range<usize>)> {
    let mut out = Vec::with_capacity(spans.len() * 2 + 1);
    let mut pos = 0;
    for span in spans {
        if span.range.start > pos {
            out.push((Phase::Think, pos..span.range.start));
        }
        out.push((span.phase, span.range.clone()));
        pos = span.range.end;
    }
    if pos < text.len() {
        out.push((Phase::Think, pos..text.len()));
    }
    out
}
