//! Agentic rollout: alternate generation with retrieval until the model
//! answers.
//!
//! Each generation stops on `</search>` or end-of-sequence. A search is
//! parsed, answered by the retriever and injected as an `<information>`
//! span; end-of-sequence ends the rollout with answer extraction.

pub mod backend;
pub mod remote;
pub mod tokens;

use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

pub use backend::{
    BackendError, FinishReason, FnBackend, Generation, GenerationParams, GenerationRequest,
    ModelBackend, ScriptedBackend,
};
pub use remote::{RemoteBackend, RemoteConfig};
pub use tokens::{count_tokens, TokenCounts};

use crate::embedding::{EmbeddingTable, EncoderConfig};
use crate::graph::{AttributedGraph, GraphError, NodeId};
use crate::ppr::{PprCache, PprConfig};
use crate::query::{
    parse_search_block, phase_segments, render_prompt, resolve_answer, scan_spans, Answer,
    FallbackEvent, Phase, PromptContext, PromptTemplate, QueryError, StructuredQuery, TaggedSpan,
    TaskKind, TemplateKind, Traversal,
};
use crate::retriever::{
    format_information, Anchors, BaselineMode, Retrieval, RetrievalLogRecord, RetrieveError,
    Retriever, RetrieverConfig, TraversalState,
};

/// Appended after the last allowed search.
pub const FINAL_INSTRUCTION: &str =
    "\nThe search budget is used up. Give the final answer now without any further search.\n";

/// Information text injected for a search block with no usable query.
pub const EMPTY_QUERY_MESSAGE: &str =
    "The search block had no query text, so nothing was retrieved. Put keywords in the query.";

const STOP: &[&str] = &["</search>"];

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Retrieve(#[from] RetrieveError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("ConfigInvalid: {0}")]
    ConfigInvalid(String),
}

impl RolloutError {
    pub fn kind(&self) -> &'static str {
        match self {
            RolloutError::Query(e) => e.kind(),
            RolloutError::Retrieve(e) => e.kind(),
            RolloutError::Graph(e) => e.kind(),
            RolloutError::ConfigInvalid(_) => "ConfigInvalid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutConfig {
    pub max_search_steps: usize,
    pub traversal: Traversal,
    pub baseline: BaselineMode,
    pub params: GenerationParams,
    /// Advertise the attribute scope in flexible-traversal classification prompts.
    pub advertise_attribute: bool,
    /// Replaces the builtin template for the task.
    pub template: Option<PromptTemplate>,
}

impl RolloutConfig {
    pub fn new(traversal: Traversal) -> Self {
        RolloutConfig {
            max_search_steps: 8,
            traversal,
            baseline: BaselineMode::GraphAware,
            params: GenerationParams::default(),
            advertise_attribute: false,
            template: None,
        }
    }

    pub fn validate(&self) -> Result<(), RolloutError> {
        if self.max_search_steps < 1 {
            return Err(RolloutError::ConfigInvalid("max_search_steps must be >= 1".into()));
        }
        if !(self.params.temperature >= 0.0 && self.params.temperature.is_finite()) {
            return Err(RolloutError::ConfigInvalid(format!(
                "temperature must be >= 0, got {}",
                self.params.temperature
            )));
        }
        if self.params.max_total_tokens < 1 {
            return Err(RolloutError::ConfigInvalid("max_total_tokens must be >= 1".into()));
        }
        Ok(())
    }

    pub fn template_for(&self, task: &TaskKind) -> PromptTemplate {
        if let Some(t) = &self.template {
            return t.clone();
        }
        let kind = match (task, self.traversal) {
            (TaskKind::NodeClassification { .. }, Traversal::F) if self.advertise_attribute => {
                TemplateKind::ClassificationF3
            }
            (TaskKind::NodeClassification { .. }, Traversal::F) => TemplateKind::ClassificationF,
            (TaskKind::NodeClassification { .. }, Traversal::R) => TemplateKind::ClassificationR,
            (TaskKind::LinkPrediction, Traversal::F) => TemplateKind::LinkF,
            (TaskKind::LinkPrediction, Traversal::R) => TemplateKind::LinkR,
        };
        PromptTemplate::builtin(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FailureKind {
    BackendFailure,
    AnswerExtractionFailed,
    TokenBudgetExceeded,
}

impl FailureKind {
    pub fn name(self) -> &'static str {
        match self {
            FailureKind::BackendFailure => "BackendFailure",
            FailureKind::AnswerExtractionFailed => "AnswerExtractionFailed",
            FailureKind::TokenBudgetExceeded => "TokenBudgetExceeded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Outcome {
    Answered(Answer),
    Failed { kind: FailureKind, detail: String },
}

impl Outcome {
    pub fn answer(&self) -> Option<&Answer> {
        match self {
            Outcome::Answered(a) => Some(a),
            Outcome::Failed { .. } => None,
        }
    }

    fn failed(kind: FailureKind, detail: impl Into<String>) -> Self {
        Outcome::Failed {
            kind,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalSummary {
    pub anchor: String,
    pub scope: String,
    pub candidates: usize,
    pub scored: usize,
    pub fallback_used: bool,
    pub returned: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchRecord {
    pub raw: String,
    pub query: Option<StructuredQuery>,
    pub fallback: Option<FallbackEvent>,
    pub error: Option<String>,
    pub retrieval: Option<RetrievalSummary>,
    pub information: String,
    #[serde(skip)]
    pub detail: Option<Retrieval>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageTimings {
    pub render: Duration,
    pub generation: Duration,
    pub retrieval: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RolloutTrace {
    pub traversal: Traversal,
    pub baseline: BaselineMode,
    pub anchors: Vec<String>,
    pub prompt: String,
    pub prompt_tokens: usize,
    pub transcript: String,
    pub spans: Vec<TaggedSpan>,
    pub token_counts: TokenCounts,
    pub searches: Vec<SearchRecord>,
    pub generations: usize,
    pub final_instruction_sent: bool,
    pub outcome: Outcome,
    #[serde(skip)]
    pub timings: StageTimings,
}

impl RolloutTrace {
    pub fn information_spans(&self) -> usize {
        self.spans.iter().filter(|s| s.phase == Phase::Information).count()
    }

    /// One JSON record. Wall-clock timings vary run to run, so they are
    /// opt-in; without them the record is a pure function of the inputs.
    pub fn to_record(&self, include_timings: bool) -> String {
        let mut v = serde_json::to_value(self).expect("trace serializes");
        if include_timings {
            let t = &self.timings;
            v["timings_us"] = serde_json::json!({
                "render": t.render.as_micros() as u64,
                "generation": t.generation.as_micros() as u64,
                "retrieval": t.retrieval.as_micros() as u64,
                "total": t.total.as_micros() as u64,
            });
        }
        serde_json::to_string(&v).expect("trace serializes")
    }

    /// Readable report: outcome and accounting first, the transcript last.
    pub fn to_text(&self, include_timings: bool) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "traversal: {}\nbaseline: {:?}\nanchors: {}\n",
            self.traversal,
            self.baseline,
            self.anchors.join(", ")
        ));
        match &self.outcome {
            Outcome::Answered(Answer::ClassLabel(c)) => out.push_str(&format!("answer: {c}\n")),
            Outcome::Answered(Answer::Link(b)) => {
                out.push_str(&format!("answer: {}\n", if *b { "yes" } else { "no" }))
            }
            Outcome::Failed { kind, detail } => {
                out.push_str(&format!("failure: {}: {detail}\n", kind.name()))
            }
        }
        let c = &self.token_counts;
        out.push_str(&format!(
            "tokens: think={} search={} information={} answer={} total={} prompt={}\n",
            c.think,
            c.search,
            c.information,
            c.answer,
            c.total(),
            self.prompt_tokens
        ));
        if include_timings {
            out.push_str(&format!(
                "timings_ms: generation={:.3} retrieval={:.3} total={:.3}\n",
                self.timings.generation.as_secs_f64() * 1e3,
                self.timings.retrieval.as_secs_f64() * 1e3,
                self.timings.total.as_secs_f64() * 1e3
            ));
        }
        for (i, s) in self.searches.iter().enumerate() {
            let query = s
                .query
                .as_ref()
                .map(|q| q.to_dsl())
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!("search {}: {query}", i + 1));
            if let Some(f) = &s.fallback {
                out.push_str(&format!(" [fallback: {:?}]", f.reason));
            }
            if let Some(e) = &s.error {
                out.push_str(&format!(" [error: {e}]"));
            }
            if let Some(r) = &s.retrieval {
                let ids: Vec<&str> = r.returned.iter().map(|(id, _)| id.as_str()).collect();
                out.push_str(&format!(
                    " scope={} candidates={} returned=[{}]",
                    r.scope,
                    r.candidates,
                    ids.join(", ")
                ));
            }
            out.push('\n');
        }
        out.push_str("--- prompt ---\n");
        out.push_str(&self.prompt);
        out.push_str("--- transcript ---\n");
        out.push_str(&self.transcript);
        if !self.transcript.ends_with('\n') {
            out.push('\n');
        }
        out
    }

    /// Retrieval-log lines for every search that reached the retriever.
    pub fn retrieval_log(&self, g: &AttributedGraph) -> Vec<RetrievalLogRecord> {
        self.searches
            .iter()
            .filter_map(|s| s.detail.as_ref())
            .map(|r| RetrievalLogRecord::new(g, r))
            .collect()
    }
}

/// Per-phase token counts over the partition of `transcript` given by `spans`.
pub fn phase_token_counts(transcript: &str, spans: &[TaggedSpan]) -> TokenCounts {
    let mut counts = TokenCounts::default();
    for (phase, range) in phase_segments(transcript, spans) {
        counts.add(phase, count_tokens(&transcript[range]));
    }
    counts
}

/// Shared, immutable inputs of many rollouts.
pub struct Engine<'a> {
    graph: &'a AttributedGraph,
    embeddings: &'a EmbeddingTable,
    encoder: &'a EncoderConfig,
    cache: &'a PprCache,
    retriever: RetrieverConfig,
    ppr: PprConfig,
    rollout: RolloutConfig,
    context: PromptContext,
    avg_degree: f64,
}

impl<'a> Engine<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        graph: &'a AttributedGraph,
        embeddings: &'a EmbeddingTable,
        encoder: &'a EncoderConfig,
        cache: &'a PprCache,
        retriever: RetrieverConfig,
        ppr: PprConfig,
        rollout: RolloutConfig,
        context: PromptContext,
    ) -> Result<Self, RolloutError> {
        retriever.validate()?;
        ppr.validate().map_err(RetrieveError::from)?;
        rollout.validate()?;
        if embeddings.len() != graph.node_count() {
            return Err(RolloutError::ConfigInvalid(format!(
                "embedding table has {} rows for {} nodes",
                embeddings.len(),
                graph.node_count()
            )));
        }
        let needs_query_encoder =
            retriever.alpha < 1.0 || rollout.baseline == BaselineMode::StructureAgnostic;
        if needs_query_encoder && matches!(encoder, EncoderConfig::Precomputed { .. }) {
            return Err(RolloutError::ConfigInvalid(
                "precomputed vectors cannot encode query text; use alpha=1 with graph-aware retrieval"
                    .into(),
            ));
        }
        let avg_degree = graph.degree_stats().avg_degree;
        Ok(Engine {
            graph,
            embeddings,
            encoder,
            cache,
            retriever,
            ppr,
            rollout,
            context,
            avg_degree,
        })
    }

    pub fn graph(&self) -> &'a AttributedGraph {
        self.graph
    }

    pub fn rollout_config(&self) -> &RolloutConfig {
        &self.rollout
    }

    pub fn retriever_config(&self) -> &RetrieverConfig {
        &self.retriever
    }

    /// Renders the task prompt for `anchors`, seen through the masked view.
    pub fn prompt(
        &self,
        anchors: &Anchors,
        task: &TaskKind,
        mask: Option<(NodeId, NodeId)>,
    ) -> Result<String, RolloutError> {
        let mut view = self.graph.view();
        if let Some((u, v)) = mask {
            view = view.masking(u, v);
        }
        let ctx = self.context.clone();
        let ctx = match (task, anchors) {
            (TaskKind::NodeClassification { classes }, Anchors::Single(a)) => {
                ctx.classification(self.graph.text(*a), view.degree(*a), self.avg_degree, classes)
            }
            (TaskKind::LinkPrediction, Anchors::Pair(a, b)) => ctx.link(
                self.graph.text(*a),
                self.graph.text(*b),
                view.degree(*a),
                view.degree(*b),
                self.avg_degree,
            ),
            (TaskKind::NodeClassification { .. }, _) => {
                return Err(RolloutError::ConfigInvalid(
                    "node classification needs a single anchor".into(),
                ))
            }
            (TaskKind::LinkPrediction, _) => {
                return Err(RolloutError::ConfigInvalid(
                    "link prediction needs an anchor pair".into(),
                ))
            }
        };
        Ok(render_prompt(&self.rollout.template_for(task), &ctx)?)
    }

    /// Runs one rollout. Setup problems are errors; failures inside the loop
    /// are recorded in the trace outcome.
    pub fn run_inference<B: ModelBackend + ?Sized>(
        &self,
        backend: &B,
        anchors: Anchors,
        task: &TaskKind,
        mask: Option<(NodeId, NodeId)>,
    ) -> Result<RolloutTrace, RolloutError> {
        let started = Instant::now();
        let mut timings = StageTimings::default();
        for a in anchors.nodes() {
            self.graph.check(a)?;
        }
        let mut view = self.graph.view();
        if let Some((u, v)) = mask {
            view = view.masking(u, v);
        }
        let retriever = Retriever::new(
            view,
            self.embeddings,
            self.encoder,
            self.retriever.clone(),
            self.ppr,
            self.cache,
        )?;
        let prompt = self.prompt(&anchors, task, mask)?;
        timings.render = started.elapsed();

        let cfg = &self.rollout;
        let budget = cfg.params.max_total_tokens;
        let prompt_tokens = count_tokens(&prompt);
        let mut state = TraversalState::new(cfg.traversal);
        let mut transcript = String::new();
        // Offsets of engine-injected `<information>` tags; any other
        // occurrence is model text.
        let mut trusted: Vec<usize> = Vec::new();
        let mut searches: Vec<SearchRecord> = Vec::new();
        let mut generations = 0;
        let mut final_sent = false;

        let outcome = loop {
            let used = prompt_tokens + count_tokens(&transcript);
            if used >= budget {
                break Outcome::failed(
                    FailureKind::TokenBudgetExceeded,
                    format!("{used} tokens used of {budget}"),
                );
            }
            let request = GenerationRequest {
                prompt: &prompt,
                transcript: &transcript,
                step: generations,
                temperature: cfg.params.temperature,
                max_tokens: budget - used,
                stop: STOP,
            };
            let t = Instant::now();
            let generated = backend.generate(&request);
            timings.generation += t.elapsed();
            let generation = match generated {
                Ok(g) => g,
                Err(BackendError::Length) => {
                    break Outcome::failed(
                        FailureKind::TokenBudgetExceeded,
                        "backend stopped at its token limit",
                    )
                }
                Err(e) => break Outcome::failed(FailureKind::BackendFailure, e.to_string()),
            };
            generations += 1;
            let gen_start = transcript.len();
            transcript.push_str(&generation.text);
            let used = prompt_tokens + count_tokens(&transcript);
            if used > budget {
                break Outcome::failed(
                    FailureKind::TokenBudgetExceeded,
                    format!("{used} tokens used of {budget}"),
                );
            }

            match generation.finish {
                FinishReason::EndOfSequence => {
                    let spans = scan_spans(&transcript, |at| trusted.contains(&at));
                    let last_answer = spans
                        .iter()
                        .rev()
                        .find(|s| s.phase == Phase::Answer && s.complete);
                    break match last_answer {
                        None => Outcome::failed(
                            FailureKind::AnswerExtractionFailed,
                            QueryError::NoAnswerBlock.to_string(),
                        ),
                        Some(span) => match resolve_answer(&span.text, task) {
                            Ok(a) => Outcome::Answered(a),
                            Err(e) => Outcome::failed(FailureKind::AnswerExtractionFailed, e.to_string()),
                        },
                    };
                }
                FinishReason::StopSequence => {
                    if final_sent {
                        break Outcome::failed(
                            FailureKind::AnswerExtractionFailed,
                            "searched again after the final instruction",
                        );
                    }
                    let raw = latest_search_text(&transcript[gen_start..]).to_string();
                    let t = Instant::now();
                    let record = self.serve_search(&retriever, &anchors, &raw, &mut state)?;
                    timings.retrieval += t.elapsed();
                    trusted.push(transcript.len());
                    transcript.push_str(Phase::Information.open_tag());
                    transcript.push('\n');
                    transcript.push_str(&record.information);
                    transcript.push('\n');
                    transcript.push_str(Phase::Information.close_tag());
                    transcript.push('\n');
                    searches.push(record);
                    if searches.len() >= cfg.max_search_steps {
                        transcript.push_str(FINAL_INSTRUCTION);
                        final_sent = true;
                    }
                }
            }
        };

        let spans = scan_spans(&transcript, |at| trusted.contains(&at));
        let token_counts = phase_token_counts(&transcript, &spans);
        debug_assert_eq!(token_counts.total(), count_tokens(&transcript));
        timings.total = started.elapsed();
        Ok(RolloutTrace {
            traversal: cfg.traversal,
            baseline: cfg.baseline,
            anchors: anchors
                .nodes()
                .into_iter()
                .map(|a| self.graph.nodes()[a.index()].external_id.clone())
                .collect(),
            prompt,
            prompt_tokens,
            transcript,
            spans,
            token_counts,
            searches,
            generations,
            final_instruction_sent: final_sent,
            outcome,
            timings,
        })
    }

    fn serve_search(
        &self,
        retriever: &Retriever<'_>,
        anchors: &Anchors,
        raw: &str,
        state: &mut TraversalState,
    ) -> Result<SearchRecord, RolloutError> {
        let parsed = match parse_search_block(raw, self.rollout.traversal) {
            Ok(p) => p,
            Err(e @ QueryError::EmptyQueryText) => {
                return Ok(SearchRecord {
                    raw: raw.to_string(),
                    query: None,
                    fallback: None,
                    error: Some(e.to_string()),
                    retrieval: None,
                    information: EMPTY_QUERY_MESSAGE.to_string(),
                    detail: None,
                })
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(f) = &parsed.fallback {
            log::debug!("search block fell back to local hop 1: {:?}", f.reason);
        }
        let r = retriever.retrieve_with(self.rollout.baseline, anchors, &parsed.query, state)?;
        let information = format_information(&r.result, self.graph, self.retriever.info_char_budget);
        let ext = |v: NodeId| self.graph.nodes()[v.index()].external_id.clone();
        let summary = RetrievalSummary {
            anchor: ext(r.anchor),
            scope: r.candidates.scope.label(),
            candidates: r.candidates.len(),
            scored: r.scored,
            fallback_used: r.candidates.fallback_used,
            returned: r.result.entries.iter().map(|&(v, s)| (ext(v), s)).collect(),
        };
        Ok(SearchRecord {
            raw: raw.to_string(),
            query: Some(parsed.query),
            fallback: parsed.fallback,
            error: None,
            retrieval: Some(summary),
            information,
            detail: Some(r),
        })
    }
}

/// Text of the search block that ends `generation`, or "" when the
/// generation holds no opening tag.
fn latest_search_text(generation: &str) -> &str {
    let body = generation
        .strip_suffix(Phase::Search.close_tag())
        .unwrap_or(generation);
    match body.rfind(Phase::Search.open_tag()) {
        Some(i) => &body[i + Phase::Search.open_tag().len()..],
        None => "",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::corpus_embeddings;
    use crate::graph::fixtures::g0;

    struct Fx {
        g: AttributedGraph,
        table: EmbeddingTable,
        enc: EncoderConfig,
        cache: PprCache,
    }

    fn fx() -> Fx {
        let g = g0();
        let enc = EncoderConfig::default();
        let table = corpus_embeddings(&enc, &g).unwrap();
        Fx {
            g,
            table,
            enc,
            cache: PprCache::in_memory(),
        }
    }

    fn engine(fx: &Fx, t: Traversal) -> Engine<'_> {
        Engine::new(
            &fx.g,
            &fx.table,
            &fx.enc,
            &fx.cache,
            RetrieverConfig::for_traversal(t),
            PprConfig::default(),
            RolloutConfig::new(t),
            PromptContext::new("Cora", "citation", "paper", "Papers cite other papers."),
        )
        .unwrap()
    }

    fn task() -> TaskKind {
        TaskKind::NodeClassification {
            classes: vec!["A".into(), "B".into()],
        }
    }

    #[test]
    fn search_then_answer() {
        let fx = fx();
        let e = engine(&fx, Traversal::F);
        let b = ScriptedBackend::new([
            "<think>look around</think><search>mode=local, hop=1, query=\"gibbs sampler\"</search>",
            "<think>done</think><answer>A</answer>",
        ]);
        let t = e.run_inference(&b, Anchors::Single(NodeId(0)), &task(), None).unwrap();
        assert_eq!(t.outcome, Outcome::Answered(Answer::ClassLabel("A".into())));
        assert_eq!(t.searches.len(), 1);
        assert_eq!(t.information_spans(), 1);
        let phases: Vec<Phase> = t.spans.iter().map(|s| s.phase).collect();
        assert_eq!(
            phases,
            [Phase::Think, Phase::Search, Phase::Information, Phase::Think, Phase::Answer]
        );
        assert_eq!(t.token_counts.total(), count_tokens(&t.transcript));
        assert_eq!(t.spans[2].range.start, t.spans[1].range.end);
    }

    #[test]
    fn model_written_information_is_plain_text() {
        let fx = fx();
        let e = engine(&fx, Traversal::F);
        let b = ScriptedBackend::new(["<information>fake</information><answer>B</answer>"]);
        let t = e.run_inference(&b, Anchors::Single(NodeId(0)), &task(), None).unwrap();
        assert_eq!(t.information_spans(), 0);
        assert_eq!(t.token_counts.information, 0);
        assert_eq!(t.outcome, Outcome::Answered(Answer::ClassLabel("B".into())));
    }

    #[test]
    fn empty_query_consumes_a_step_without_retrieval() {
        let fx = fx();
        let e = engine(&fx, Traversal::F);
        let b = ScriptedBackend::new(["<search>mode=local, hop=1, query=\"\"</search>", "<answer>A</answer>"]);
        let t = e.run_inference(&b, Anchors::Single(NodeId(0)), &task(), None).unwrap();
        assert_eq!(t.searches.len(), 1);
        assert!(t.searches[0].detail.is_none());
        assert!(t.transcript.contains(EMPTY_QUERY_MESSAGE));
        assert_eq!(t.information_spans(), 1);
    }

    #[test]
    fn exhausted_script_is_backend_failure() {
        let fx = fx();
        let e = engine(&fx, Traversal::R);
        let b = ScriptedBackend::new(["<search>gibbs</search>"]);
        let t = e.run_inference(&b, Anchors::Single(NodeId(0)), &task(), None).unwrap();
        assert!(matches!(
            t.outcome,
            Outcome::Failed { kind: FailureKind::BackendFailure, .. }
        ));
    }

    #[test]
    fn token_budget() {
        let fx = fx();
        let mut cfg = RolloutConfig::new(Traversal::F);
        cfg.params.max_total_tokens = 10;
        let e = Engine::new(
            &fx.g,
            &fx.table,
            &fx.enc,
            &fx.cache,
            RetrieverConfig::for_traversal(Traversal::F),
            PprConfig::default(),
            cfg,
            PromptContext::new("Cora", "citation", "paper", "Papers cite other papers."),
        )
        .unwrap();
        let b = ScriptedBackend::new(["<answer>A</answer>"]);
        let t = e.run_inference(&b, Anchors::Single(NodeId(0)), &task(), None).unwrap();
        assert!(matches!(
            t.outcome,
            Outcome::Failed { kind: FailureKind::TokenBudgetExceeded, .. }
        ));
    }

    #[test]
    fn latest_search_extraction() {
        assert_eq!(latest_search_text("<think>x</think><search>q</search>"), "q");
        assert_eq!(latest_search_text("no tags</search>"), "");
    }
}
