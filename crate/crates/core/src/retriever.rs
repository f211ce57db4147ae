//! Two-stage graph-aware retriever.
//!
//! Stage one builds a topology-grounded candidate set from the local (hop),
//! global (personalized PageRank) or attribute pool. Stage two ranks every
//! candidate by
//!
//! ```text
//! score(v) = alpha * cos(phi(v), phi(anchor)) + (1 - alpha) * cos(phi(v), phi(query))
//! ```
//!
//! and keeps the top `k`, ties broken by ascending node id.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::embedding::{norm, EmbeddingError, EmbeddingTable, EncoderConfig};
use crate::graph::{AttributedGraph, GraphError, GraphView, NodeId};
use crate::ppr::{PprCache, PprConfig, PprError};
use crate::query::{AnchorSelector, Phase, QueryError, SearchSpace, StructuredQuery, Traversal};

pub const NO_RESULTS: &str = "No relevant nodes found.";
pub const DEFAULT_INFO_CHAR_BUDGET: usize = 600;
pub const TRUNCATION_MARKER: &str = "...";

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Ppr(#[from] PprError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("ConfigInvalid: {0}")]
    ConfigInvalid(String),
}

impl RetrieveError {
    pub fn kind(&self) -> &'static str {
        match self {
            RetrieveError::Graph(e) => e.kind(),
            RetrieveError::Embedding(e) => e.kind(),
            RetrieveError::Ppr(e) => e.kind(),
            RetrieveError::Query(e) => e.kind(),
            RetrieveError::ConfigInvalid(_) => "ConfigInvalid",
        }
    }
}

/// Whether retrieval uses topology or scans the whole corpus by query
/// similarity only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    GraphAware,
    StructureAgnostic,
}

impl BaselineMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "graph_aware" => Some(BaselineMode::GraphAware),
            "structure_agnostic" => Some(BaselineMode::StructureAgnostic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrieverConfig {
    pub alpha: f64,
    pub k: usize,
    pub hop_max: u8,
    pub global_pool_size: usize,
    pub attribute_pool_size: usize,
    /// Largest ring served by the recursive traversal.
    pub r_hop_ceiling: u32,
    /// Characters of attribute text injected per node.
    pub info_char_budget: usize,
}

impl RetrieverConfig {
    pub fn for_traversal(t: Traversal) -> Self {
        RetrieverConfig {
            alpha: match t {
                Traversal::R => 1.0,
                Traversal::F => 0.5,
            },
            k: 3,
            hop_max: 2,
            global_pool_size: 50,
            attribute_pool_size: 50,
            r_hop_ceiling: 4,
            info_char_budget: DEFAULT_INFO_CHAR_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<(), RetrieveError> {
        let bad = |m: String| Err(RetrieveError::ConfigInvalid(m));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        if self.k < 1 {
            return bad("k must be >= 1".into());
        }
        if !(1..=2).contains(&self.hop_max) {
            return bad(format!("hop_max must be 1 or 2, got {}", self.hop_max));
        }
        if self.global_pool_size < 1 || self.attribute_pool_size < 1 {
            return bad("pool sizes must be >= 1".into());
        }
        if self.r_hop_ceiling < 1 {
            return bad("r_hop_ceiling must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Anchors {
    Single(NodeId),
    Pair(NodeId, NodeId),
}

impl Anchors {
    pub fn effective(&self, selector: AnchorSelector) -> NodeId {
        match (*self, selector) {
            (Anchors::Single(a), _) => a,
            (Anchors::Pair(a, _), AnchorSelector::First) => a,
            (Anchors::Pair(_, b), AnchorSelector::Second) => b,
        }
    }

    pub fn contains(&self, v: NodeId) -> bool {
        match *self {
            Anchors::Single(a) => a == v,
            Anchors::Pair(a, b) => a == v || b == v,
        }
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        match *self {
            Anchors::Single(a) => vec![a],
            Anchors::Pair(a, b) => vec![a, b],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub local: bool,
    pub global: bool,
    pub attribute: bool,
    /// Whole-corpus scan of the structure-agnostic baseline.
    pub corpus: bool,
}

/// Activated pools for one search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ScopeFlags {
    pub local_hop: Option<u32>,
    pub global: bool,
    pub attribute: bool,
    pub corpus: bool,
}

impl ScopeFlags {
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(h) = self.local_hop {
            parts.push(format!("local:{h}"));
        }
        if self.global {
            parts.push("global".to_string());
        }
        if self.attribute {
            parts.push("attribute".to_string());
        }
        if self.corpus {
            parts.push("corpus".to_string());
        }
        parts.join("+")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSet {
    /// Ascending node ids.
    pub members: Vec<NodeId>,
    /// Parallel to `members`.
    pub provenance: Vec<Provenance>,
    pub scope: ScopeFlags,
    pub fallback_used: bool,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    fn from_tagged(mut tagged: Vec<(NodeId, Provenance)>, scope: ScopeFlags, fallback_used: bool) -> Self {
        tagged.sort_by_key(|&(v, _)| v);
        let mut members: Vec<NodeId> = Vec::with_capacity(tagged.len());
        let mut provenance: Vec<Provenance> = Vec::with_capacity(tagged.len());
        for (v, p) in tagged {
            if members.last() == Some(&v) {
                let last = provenance.last_mut().expect("parallel vectors");
                last.local |= p.local;
                last.global |= p.global;
                last.attribute |= p.attribute;
                last.corpus |= p.corpus;
            } else {
                members.push(v);
                provenance.push(p);
            }
        }
        CandidateSet {
            members,
            provenance,
            scope,
            fallback_used,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedResult {
    pub entries: Vec<(NodeId, f64)>,
    pub k_requested: usize,
    pub k_returned: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraversalState {
    pub mode: Traversal,
    /// Recursive traversal only: ring served by the next search.
    pub current_hop: u32,
    pub returned_so_far: HashSet<NodeId>,
}

impl TraversalState {
    pub fn new(mode: Traversal) -> Self {
        TraversalState {
            mode,
            current_hop: 1,
            returned_so_far: HashSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Retrieval {
    pub anchor: NodeId,
    pub candidates: CandidateSet,
    pub result: RankedResult,
    /// Number of candidates passed through the scorer.
    pub scored: usize,
    pub alpha: f64,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Record of one search for the retrieval log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalLogRecord {
    pub anchor: String,
    pub scope: String,
    pub hop: Option<u32>,
    pub alpha: f64,
    pub k: usize,
    pub candidates: usize,
    pub scored: usize,
    pub micros: u128,
    pub fallback: bool,
    pub returned: Vec<(String, f64)>,
}

impl RetrievalLogRecord {
    pub fn new(g: &AttributedGraph, r: &Retrieval) -> Self {
        let ext = |v: NodeId| g.nodes()[v.index()].external_id.clone();
        RetrievalLogRecord {
            anchor: ext(r.anchor),
            scope: r.candidates.scope.label(),
            hop: r.candidates.scope.local_hop,
            alpha: r.alpha,
            k: r.result.k_requested,
            candidates: r.candidates.len(),
            scored: r.scored,
            micros: r.elapsed.as_micros(),
            fallback: r.candidates.fallback_used,
            returned: r.result.entries.iter().map(|&(v, s)| (ext(v), s)).collect(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("log record serializes")
    }
}

/// Orders by score descending, then node id ascending.
#[inline]
pub fn rank_order(a: &(NodeId, f64), b: &(NodeId, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

pub fn top_k(mut scored: Vec<(NodeId, f64)>, k: usize) -> RankedResult {
    if scored.len() > k && k > 0 {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_by(rank_order);
    scored.truncate(k);
    RankedResult {
        k_requested: k,
        k_returned: scored.len(),
        entries: scored,
    }
}

/// Hybrid score of one candidate, encoding the query text on the fly.
pub fn score_candidate(
    embeddings: &EmbeddingTable,
    encoder: &EncoderConfig,
    v: NodeId,
    anchor: NodeId,
    query: &StructuredQuery,
    alpha: f64,
) -> Result<f64, RetrieveError> {
    for n in [v, anchor] {
        if n.index() >= embeddings.len() {
            return Err(EmbeddingError::MissingVector(n.to_string()).into());
        }
    }
    let q = QueryVector::new(encoder, &query.text, alpha)?;
    Ok(Scorer {
        embeddings,
        anchor,
        alpha,
        query: q.as_ref(),
    }
    .score(v))
}

struct QueryVector {
    values: Vec<f64>,
    norm: f64,
}

impl QueryVector {
    /// Only encoded when the query term carries weight.
    fn new(encoder: &EncoderConfig, text: &str, alpha: f64) -> Result<Option<Self>, RetrieveError> {
        if alpha >= 1.0 {
            return Ok(None);
        }
        let v = encoder.encode(text).map_err(|e| match e {
            EmbeddingError::EmptyText => RetrieveError::Query(QueryError::EmptyQueryText),
            other => other.into(),
        })?;
        let values = v.values().to_vec();
        let n = norm(&values);
        Ok(Some(QueryVector { values, norm: n }))
    }
}

struct Scorer<'a> {
    embeddings: &'a EmbeddingTable,
    anchor: NodeId,
    alpha: f64,
    query: Option<&'a QueryVector>,
}

impl Scorer<'_> {
    #[inline]
    fn score(&self, v: NodeId) -> f64 {
        let to_anchor = if self.alpha > 0.0 {
            self.embeddings.cos_nodes(v, self.anchor)
        } else {
            0.0
        };
        let to_query = match self.query {
            Some(q) => self.embeddings.cos_with(v, &q.values, q.norm),
            None => 0.0,
        };
        self.alpha * to_anchor + (1.0 - self.alpha) * to_query
    }
}

pub struct Retriever<'a> {
    view: GraphView<'a>,
    embeddings: &'a EmbeddingTable,
    encoder: &'a EncoderConfig,
    cfg: RetrieverConfig,
    ppr: PprConfig,
    cache: &'a PprCache,
}

impl<'a> Retriever<'a> {
    pub fn new(
        view: GraphView<'a>,
        embeddings: &'a EmbeddingTable,
        encoder: &'a EncoderConfig,
        cfg: RetrieverConfig,
        ppr: PprConfig,
        cache: &'a PprCache,
    ) -> Result<Self, RetrieveError> {
        cfg.validate()?;
        ppr.validate()?;
        if embeddings.len() != view.node_count() {
            return Err(RetrieveError::ConfigInvalid(format!(
                "embedding table has {} rows for {} nodes",
                embeddings.len(),
                view.node_count()
            )));
        }
        Ok(Retriever {
            view,
            embeddings,
            encoder,
            cfg,
            ppr,
            cache,
        })
    }

    pub fn config(&self) -> &RetrieverConfig {
        &self.cfg
    }

    pub fn view(&self) -> GraphView<'a> {
        self.view
    }

    fn check_anchors(&self, anchors: &Anchors) -> Result<(), RetrieveError> {
        for a in anchors.nodes() {
            self.view.graph().check(a)?;
        }
        Ok(())
    }

    fn global_pool(&self, anchor: NodeId) -> Result<Vec<NodeId>, RetrieveError> {
        let cfg = PprConfig {
            pool_size: self.cfg.global_pool_size,
            ..self.ppr
        };
        Ok(self
            .cache
            .global_pool(self.view, anchor, &cfg)?
            .into_iter()
            .map(|(v, _)| v)
            .collect())
    }

    fn attribute_pool(&self, anchor: NodeId, anchors: &Anchors) -> Vec<NodeId> {
        let n = self.view.node_count();
        let sims: Vec<(NodeId, f64)> = (0..n as u32)
            .map(NodeId)
            .filter(|&v| !anchors.contains(v))
            .map(|v| (v, self.embeddings.cos_nodes(v, anchor)))
            .collect();
        top_k(sims, self.cfg.attribute_pool_size)
            .entries
            .into_iter()
            .map(|(v, _)| v)
            .collect()
    }

    /// Candidate construction for one search.
    pub fn build_candidates(
        &self,
        anchors: &Anchors,
        query: &StructuredQuery,
        state: &TraversalState,
    ) -> Result<CandidateSet, RetrieveError> {
        self.check_anchors(anchors)?;
        let anchor = anchors.effective(query.anchor);
        let excluded = |v: &NodeId| anchors.contains(*v) || state.returned_so_far.contains(v);
        let tag = |nodes: Vec<NodeId>, p: Provenance| -> Vec<(NodeId, Provenance)> {
            nodes
                .into_iter()
                .filter(|v| !excluded(v))
                .map(|v| (v, p))
                .collect()
        };
        match state.mode {
            Traversal::F => {
                let mut scope = ScopeFlags::default();
                let tagged = match query.space {
                    SearchSpace::Local(h) => {
                        let h = u32::from(h.clamp(1, self.cfg.hop_max));
                        scope.local_hop = Some(h);
                        let pool = self.view.hop_neighborhood(anchor, h)?;
                        tag(pool, Provenance { local: true, ..Default::default() })
                    }
                    SearchSpace::Global => {
                        scope.global = true;
                        tag(self.global_pool(anchor)?, Provenance { global: true, ..Default::default() })
                    }
                    SearchSpace::Attribute => {
                        scope.attribute = true;
                        tag(
                            self.attribute_pool(anchor, anchors),
                            Provenance { attribute: true, ..Default::default() },
                        )
                    }
                };
                Ok(CandidateSet::from_tagged(tagged, scope, false))
            }
            Traversal::R => {
                let hop = state.current_hop.clamp(1, self.cfg.r_hop_ceiling);
                let ring = self.view.exact_hop_ring(anchor, hop)?;
                let mut tagged = tag(ring, Provenance { local: true, ..Default::default() });
                let mut scope = ScopeFlags {
                    local_hop: Some(hop),
                    ..Default::default()
                };
                let mut fallback_used = false;
                if tagged.len() < self.cfg.k {
                    let present: HashSet<NodeId> = tagged.iter().map(|&(v, _)| v).collect();
                    for v in self.global_pool(anchor)? {
                        if tagged.len() >= self.cfg.k {
                            break;
                        }
                        if excluded(&v) || present.contains(&v) {
                            continue;
                        }
                        tagged.push((v, Provenance { global: true, ..Default::default() }));
                        fallback_used = true;
                    }
                    scope.global = fallback_used;
                }
                Ok(CandidateSet::from_tagged(tagged, scope, fallback_used))
            }
        }
    }

    /// Builds candidates, scores them and returns the top `k`. Updates the
    /// traversal state with the returned nodes.
    pub fn retrieve(
        &self,
        anchors: &Anchors,
        query: &StructuredQuery,
        state: &mut TraversalState,
    ) -> Result<Retrieval, RetrieveError> {
        let start = Instant::now();
        let anchor = anchors.effective(query.anchor);
        let candidates = self.build_candidates(anchors, query, state)?;
        let alpha = self.cfg.alpha;
        let qv = if candidates.is_empty() {
            None
        } else {
            QueryVector::new(self.encoder, &query.text, alpha)?
        };
        let scorer = Scorer {
            embeddings: self.embeddings,
            anchor,
            alpha,
            query: qv.as_ref(),
        };
        let scored: Vec<(NodeId, f64)> = candidates
            .members
            .iter()
            .map(|&v| (v, scorer.score(v)))
            .collect();
        let n_scored = scored.len();
        let result = top_k(scored, self.cfg.k);
        let elapsed = start.elapsed();

        state.returned_so_far.extend(result.entries.iter().map(|&(v, _)| v));
        if state.mode == Traversal::R {
            state.current_hop += 1;
        }
        Ok(Retrieval {
            anchor,
            candidates,
            result,
            scored: n_scored,
            alpha,
            elapsed,
        })
    }

    /// Query-only similarity over every node except the anchors.
    pub fn retrieve_structure_agnostic(
        &self,
        anchors: &Anchors,
        query: &StructuredQuery,
    ) -> Result<Retrieval, RetrieveError> {
        let start = Instant::now();
        self.check_anchors(anchors)?;
        let anchor = anchors.effective(query.anchor);
        let qv = QueryVector::new(self.encoder, &query.text, 0.0)?;
        let scorer = Scorer {
            embeddings: self.embeddings,
            anchor,
            alpha: 0.0,
            query: qv.as_ref(),
        };
        let n = self.view.node_count() as u32;
        let scored: Vec<(NodeId, f64)> = (0..n)
            .map(NodeId)
            .filter(|&v| !anchors.contains(v))
            .map(|v| (v, scorer.score(v)))
            .collect();
        let n_scored = scored.len();
        let members: Vec<NodeId> = scored.iter().map(|&(v, _)| v).collect();
        let result = top_k(scored, self.cfg.k);
        let elapsed = start.elapsed();
        let provenance = vec![
            Provenance {
                corpus: true,
                ..Default::default()
            };
            members.len()
        ];
        Ok(Retrieval {
            anchor,
            candidates: CandidateSet {
                members,
                provenance,
                scope: ScopeFlags {
                    corpus: true,
                    ..Default::default()
                },
                fallback_used: false,
            },
            result,
            scored: n_scored,
            alpha: 0.0,
            elapsed,
        })
    }

    pub fn retrieve_with(
        &self,
        mode: BaselineMode,
        anchors: &Anchors,
        query: &StructuredQuery,
        state: &mut TraversalState,
    ) -> Result<Retrieval, RetrieveError> {
        match mode {
            BaselineMode::GraphAware => self.retrieve(anchors, query, state),
            BaselineMode::StructureAgnostic => {
                let r = self.retrieve_structure_agnostic(anchors, query)?;
                state.returned_so_far.extend(r.result.entries.iter().map(|&(v, _)| v));
                if state.mode == Traversal::R {
                    state.current_hop += 1;
                }
                Ok(r)
            }
        }
    }
}

/// Numbered evidence list for an `<information>` span. Labels are never included.
pub fn format_information(result: &RankedResult, g: &AttributedGraph, char_budget: usize) -> String {
    if result.entries.is_empty() {
        return NO_RESULTS.to_string();
    }
    result
        .entries
        .iter()
        .enumerate()
        .map(|(i, &(v, _))| {
            let text = neutralize_tags(g.text(v));
            format!("{}. {}", i + 1, truncate_chars(&text, char_budget))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Node text must not open or close rollout spans once injected.
fn neutralize_tags(text: &str) -> String {
    let mut out = text.to_string();
    for phase in Phase::ALL {
        for tag in [phase.open_tag(), phase.close_tag()] {
            if out.contains(tag) {
                out = out.replace(tag, &tag.replacen('<', "\u{2039}", 1).replacen('>', "\u{203a}", 1));
            }
        }
    }
    out
}

fn truncate_chars(text: &str, budget: usize) -> String {
    match text.char_indices().nth(budget) {
        Some((cut, _)) => format!("{}{TRUNCATION_MARKER}", &text[..cut]),
        None => text.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{corpus_embeddings, EncoderConfig, Vector};
    use crate::graph::fixtures::g0;
    use crate::graph::GraphBuilder;

    fn ids(v: &[u32]) -> Vec<NodeId> {
        v.iter().copied().map(NodeId).collect()
    }

    struct Fixture {
        g: AttributedGraph,
        table: EmbeddingTable,
        enc: EncoderConfig,
        cache: PprCache,
    }

    impl Fixture {
        fn g0() -> Self {
            let g = g0();
            let enc = EncoderConfig::default();
            let table = corpus_embeddings(&enc, &g).unwrap();
            Fixture {
                g,
                table,
                enc,
                cache: PprCache::in_memory(),
            }
        }

        fn retriever(&self, cfg: RetrieverConfig) -> Retriever<'_> {
            Retriever::new(self.g.view(), &self.table, &self.enc, cfg, PprConfig::default(), &self.cache)
                .unwrap()
        }
    }

    #[test]
    fn local_one_hop_on_g0() {
        let fx = Fixture::g0();
        let r = fx.retriever(RetrieverConfig::for_traversal(Traversal::F));
        let q = StructuredQuery::new(SearchSpace::Local(1), "gibbs");
        let c = r
            .build_candidates(&Anchors::Single(NodeId(0)), &q, &TraversalState::new(Traversal::F))
            .unwrap();
        assert_eq!(c.members, ids(&[1, 2]));
        assert!(c.provenance.iter().all(|p| p.local && !p.global));
    }

    #[test]
    fn recursive_step_two_fills_from_global_pool() {
        let fx = Fixture::g0();
        let r = fx.retriever(RetrieverConfig::for_traversal(Traversal::R));
        let q = StructuredQuery::new(SearchSpace::Local(1), "gibbs");
        let mut state = TraversalState::new(Traversal::R);
        state.current_hop = 2;
        let c = r.build_candidates(&Anchors::Single(NodeId(0)), &q, &state).unwrap();
        // Ring {3}; the global pool ranks 1, 2 above 3 and 4, so 1 and 2 fill.
        assert!(c.fallback_used);
        assert_eq!(c.members, ids(&[1, 2, 3]));
        let p3 = c.provenance[2];
        assert!(p3.local && !p3.global);
        assert!(c.provenance[0].global && c.provenance[1].global);
    }

    #[test]
    fn isolated_anchor_yields_empty_result() {
        let fx = Fixture::g0();
        let r = fx.retriever(RetrieverConfig::for_traversal(Traversal::F));
        let q = StructuredQuery::new(SearchSpace::Local(1), "graph");
        let mut state = TraversalState::new(Traversal::F);
        let out = r.retrieve(&Anchors::Single(NodeId(5)), &q, &mut state).unwrap();
        assert!(out.candidates.is_empty());
        assert_eq!(out.result.k_returned, 0);
        assert_eq!(format_information(&out.result, &fx.g, 600), NO_RESULTS);
    }

    #[test]
    fn returned_nodes_are_not_repeated() {
        let fx = Fixture::g0();
        let mut cfg = RetrieverConfig::for_traversal(Traversal::F);
        cfg.k = 1;
        let r = fx.retriever(cfg);
        let q = StructuredQuery::new(SearchSpace::Local(2), "gibbs sampler");
        let mut state = TraversalState::new(Traversal::F);
        let a = Anchors::Single(NodeId(0));
        let first = r.retrieve(&a, &q, &mut state).unwrap();
        let second = r.retrieve(&a, &q, &mut state).unwrap();
        assert_ne!(first.result.entries[0].0, second.result.entries[0].0);
        assert_eq!(second.candidates.len(), 2);
    }

    #[test]
    fn hybrid_score_arithmetic() {
        // Unit vectors with chosen cosines: anchor e0, query e1.
        let mut b = GraphBuilder::new();
        for i in 0..4 {
            b.add_node(format!("{i}"), None, format!("n{i}")).unwrap();
        }
        let (g, _) = b.build().unwrap();
        let row = |ca: f64, cq: f64| {
            let rest = (1.0 - ca * ca - cq * cq).max(0.0).sqrt();
            Vector::new(vec![ca, cq, rest])
        };
        let table = EmbeddingTable::from_rows(
            3,
            vec![
                Vector::new(vec![1.0, 0.0, 0.0]),
                row(0.9, 0.2),
                row(0.5, 0.8),
                row(0.1, 0.9),
            ],
            "test",
        )
        .unwrap();
        let anchor = NodeId(0);
        let qv = QueryVector {
            values: vec![0.0, 1.0, 0.0],
            norm: 1.0,
        };
        let scorer = Scorer {
            embeddings: &table,
            anchor,
            alpha: 0.5,
            query: Some(&qv),
        };
        assert!((scorer.score(NodeId(1)) - 0.55).abs() < 1e-12);
        let scored: Vec<_> = (1..4).map(|i| (NodeId(i), scorer.score(NodeId(i)))).collect();
        let top = top_k(scored, 2);
        assert_eq!(top.entries.iter().map(|e| e.0).collect::<Vec<_>>(), ids(&[2, 1]));
        assert!((top.entries[0].1 - 0.65).abs() < 1e-12);
        assert!(g.node_count() == 4);
    }

    #[test]
    fn alpha_extremes_reduce_exactly() {
        let fx = Fixture::g0();
        let q = StructuredQuery::new(SearchSpace::Local(1), "protein folding");
        let v = NodeId(2);
        let a = NodeId(0);
        let s1 = score_candidate(&fx.table, &fx.enc, v, a, &q, 1.0).unwrap();
        assert_eq!(s1, fx.table.cos_nodes(v, a));
        let other = StructuredQuery::new(SearchSpace::Local(1), "unrelated words");
        assert_eq!(s1, score_candidate(&fx.table, &fx.enc, v, a, &other, 1.0).unwrap());
        let s0 = score_candidate(&fx.table, &fx.enc, v, a, &q, 0.0).unwrap();
        let qv = fx.enc.encode("protein folding").unwrap();
        assert_eq!(s0, fx.table.cos_with(v, qv.values(), qv.norm()));
    }

    #[test]
    fn ties_prefer_lower_id_and_k_boundary() {
        let top = top_k(vec![(NodeId(7), 0.5), (NodeId(3), 0.5), (NodeId(9), 0.1)], 2);
        assert_eq!(top.entries, vec![(NodeId(3), 0.5), (NodeId(7), 0.5)]);
        let top = top_k(vec![(NodeId(1), 0.2), (NodeId(0), 0.3)], 3);
        assert_eq!(top.k_returned, 2);
        assert_eq!(top.k_requested, 3);
    }

    #[test]
    fn information_formatting() {
        let fx = Fixture::g0();
        let res = RankedResult {
            entries: vec![(NodeId(1), 0.91)],
            k_requested: 3,
            k_returned: 1,
        };
        let info = format_information(&res, &fx.g, 600);
        assert!(info.starts_with("1. Outperforming the Gibbs sampler"));
        assert!(!info.contains('\t'));

        let long: String = "x".repeat(2000);
        assert_eq!(truncate_chars(&long, 600), format!("{}...", "x".repeat(600)));
        assert_eq!(truncate_chars("short", 600), "short");
        assert_eq!(truncate_chars("ééé", 2), "éé...");
        assert_eq!(neutralize_tags("a </information> b"), "a \u{2039}/information\u{203a} b");
    }

    #[test]
    fn structure_agnostic_scans_all_but_anchor() {
        let fx = Fixture::g0();
        let r = fx.retriever(RetrieverConfig::for_traversal(Traversal::F));
        let q = StructuredQuery::new(SearchSpace::Local(1), "gibbs sampler");
        let out = r
            .retrieve_structure_agnostic(&Anchors::Single(NodeId(0)), &q)
            .unwrap();
        assert_eq!(out.scored, 5);
        let out = r
            .retrieve_structure_agnostic(&Anchors::Pair(NodeId(0), NodeId(1)), &q)
            .unwrap();
        assert_eq!(out.scored, 4);
        assert_eq!(out.result.entries[0].0, NodeId(3));
    }

    #[test]
    fn attribute_pool_excludes_anchor() {
        let fx = Fixture::g0();
        let r = fx.retriever(RetrieverConfig::for_traversal(Traversal::F));
        let q = StructuredQuery::new(SearchSpace::Attribute, "anything");
        let c = r
            .build_candidates(&Anchors::Single(NodeId(1)), &q, &TraversalState::new(Traversal::F))
            .unwrap();
        assert_eq!(c.len(), 5);
        assert!(!c.contains(NodeId(1)));
        assert!(c.scope.attribute);
    }

    #[test]
    fn config_validation() {
        let mut cfg = RetrieverConfig::for_traversal(Traversal::F);
        cfg.alpha = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = RetrieverConfig::for_traversal(Traversal::F);
        cfg.k = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = RetrieverConfig::for_traversal(Traversal::F);
        cfg.hop_max = 3;
        assert!(cfg.validate().is_err());
    }
}
