//! Task instances, batch evaluation and reports.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{AttributedGraph, GraphError, NodeId};
use crate::query::{Answer, TaskKind, Traversal};
use crate::retriever::{Anchors, BaselineMode};
use crate::rollout::{Engine, ModelBackend, Outcome, RolloutTrace, TokenCounts};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("InsufficientEdges: {requested} positive pairs requested but the graph has {available} edges")]
    InsufficientEdges { requested: usize, available: usize },
    #[error("InsufficientNonEdges: {requested} negative pairs requested but only {available} non-edges exist")]
    InsufficientNonEdges { requested: usize, available: usize },
    #[error("InstancesInvalid: line {line}: {reason}")]
    InstancesInvalid { line: usize, reason: String },
    #[error("ConfigInvalid: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("Io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl EvalError {
    pub fn kind(&self) -> &'static str {
        match self {
            EvalError::InsufficientEdges { .. } => "InsufficientEdges",
            EvalError::InsufficientNonEdges { .. } => "InsufficientNonEdges",
            EvalError::InstancesInvalid { .. } => "InstancesInvalid",
            EvalError::ConfigInvalid(_) => "ConfigInvalid",
            EvalError::Graph(e) => e.kind(),
            EvalError::Io { .. } => "Io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Gold {
    Class(String),
    Link(bool),
}

impl Gold {
    pub fn render(&self) -> String {
        match self {
            Gold::Class(c) => c.clone(),
            Gold::Link(true) => "1".into(),
            Gold::Link(false) => "0".into(),
        }
    }

    fn matches(&self, a: &Answer) -> bool {
        match (self, a) {
            (Gold::Class(g), Answer::ClassLabel(p)) => g == p,
            (Gold::Link(g), Answer::Link(p)) => g == p,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskInstance {
    pub anchors: Anchors,
    pub gold: Gold,
}

impl TaskInstance {
    pub fn classification(anchor: NodeId, gold: impl Into<String>) -> Self {
        TaskInstance {
            anchors: Anchors::Single(anchor),
            gold: Gold::Class(gold.into()),
        }
    }

    pub fn link(a: NodeId, b: NodeId, exists: bool) -> Self {
        TaskInstance {
            anchors: Anchors::Pair(a, b),
            gold: Gold::Link(exists),
        }
    }

    /// Positive pairs hide their own edge from retrieval.
    pub fn mask(&self) -> Option<(NodeId, NodeId)> {
        match (self.anchors, &self.gold) {
            (Anchors::Pair(a, b), Gold::Link(true)) => Some((a, b)),
            _ => None,
        }
    }
}

/// Instances sharing one task definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceSet {
    pub task: TaskKind,
    pub instances: Vec<TaskInstance>,
}

impl InstanceSet {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Checks every instance against the graph and the task.
    pub fn validate(&self, g: &AttributedGraph) -> Result<(), EvalError> {
        for (i, inst) in self.instances.iter().enumerate() {
            let bad = |reason: String| EvalError::InstancesInvalid { line: i + 1, reason };
            for a in inst.anchors.nodes() {
                g.check(a)?;
            }
            match (&self.task, inst.anchors, &inst.gold) {
                (TaskKind::NodeClassification { classes }, Anchors::Single(_), Gold::Class(c)) => {
                    if !classes.contains(c) {
                        return Err(bad(format!("gold label '{c}' is not in the class list")));
                    }
                }
                (TaskKind::LinkPrediction, Anchors::Pair(a, b), Gold::Link(exists)) => {
                    if a == b {
                        return Err(bad("link pair repeats one node".into()));
                    }
                    if !exists && g.has_edge(a, b) {
                        return Err(bad("negative pair is an existing edge".into()));
                    }
                    if *exists && !g.has_edge(a, b) {
                        return Err(bad("positive pair is not an edge".into()));
                    }
                }
                _ => return Err(bad("instance does not match the task kind".into())),
            }
        }
        Ok(())
    }

    /// Parses an instances file: `id<TAB>label` lines for classification or
    /// `id<TAB>id<TAB>1|0` lines for link prediction. Blank lines and `#`
    /// comments are skipped. The class list defaults to the graph's labels.
    pub fn parse(text: &str, g: &AttributedGraph, classes: Option<Vec<String>>) -> Result<Self, EvalError> {
        let mut instances = Vec::new();
        let mut columns: Option<usize> = None;
        for (i, line) in text.lines().enumerate() {
            let bad = |reason: String| EvalError::InstancesInvalid { line: i + 1, reason };
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            match columns {
                None => columns = Some(fields.len()),
                Some(c) if c != fields.len() => {
                    return Err(bad(format!("expected {c} columns, found {}", fields.len())))
                }
                _ => {}
            }
            let node = |id: &str| g.lookup(id).ok_or_else(|| bad(format!("unknown node '{id}'")));
            let inst = match fields.as_slice() {
                [id, label] if !label.is_empty() => TaskInstance::classification(node(id)?, *label),
                [a, b, flag] => {
                    let exists = match *flag {
                        "1" => true,
                        "0" => false,
                        other => return Err(bad(format!("link flag must be 1 or 0, got '{other}'"))),
                    };
                    TaskInstance::link(node(a)?, node(b)?, exists)
                }
                _ => {
                    return Err(bad(
                        "expected 'id<TAB>label' or 'id<TAB>id<TAB>1|0'".to_string(),
                    ))
                }
            };
            instances.push(inst);
        }
        let task = match columns {
            Some(3) => TaskKind::LinkPrediction,
            _ => TaskKind::NodeClassification {
                classes: classes.unwrap_or_else(|| g.labels()),
            },
        };
        let set = InstanceSet { task, instances };
        set.validate(g)?;
        Ok(set)
    }

    pub fn load(path: &Path, g: &AttributedGraph, classes: Option<Vec<String>>) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, g, classes)
    }

    pub fn to_tsv(&self, g: &AttributedGraph) -> String {
        let ext = |v: NodeId| g.nodes()[v.index()].external_id.as_str();
        let mut out = String::new();
        for inst in &self.instances {
            match inst.anchors {
                Anchors::Single(a) => writeln!(out, "{}\t{}", ext(a), inst.gold.render()),
                Anchors::Pair(a, b) => writeln!(out, "{}\t{}\t{}", ext(a), ext(b), inst.gold.render()),
            }
            .expect("writing to a String");
        }
        out
    }
}

fn canonical_edges(g: &AttributedGraph) -> Vec<(NodeId, NodeId)> {
    let mut edges: Vec<(NodeId, NodeId)> = g
        .edges()
        .map(|(u, v)| if u <= v { (u, v) } else { (v, u) })
        .collect();
    edges.sort();
    edges.dedup();
    edges
}

/// Samples `n_pos` existing edges and `n_neg` non-edges, uniformly and
/// deterministically under `seed`. Positives come first, each in sampled
/// order, then negatives.
pub fn build_link_instances(
    g: &AttributedGraph,
    n_pos: usize,
    n_neg: usize,
    seed: u64,
) -> Result<InstanceSet, EvalError> {
    let edges = canonical_edges(g);
    if edges.len() < n_pos {
        return Err(EvalError::InsufficientEdges {
            requested: n_pos,
            available: edges.len(),
        });
    }
    let n = g.node_count();
    let pairs = n * n.saturating_sub(1) / 2;
    let non_edges = pairs - edges.len();
    if non_edges < n_neg {
        return Err(EvalError::InsufficientNonEdges {
            requested: n_neg,
            available: non_edges,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances: Vec<TaskInstance> = rand::seq::index::sample(&mut rng, edges.len(), n_pos)
        .into_iter()
        .map(|i| TaskInstance::link(edges[i].0, edges[i].1, true))
        .collect();

    if n_neg > 0 {
        let mut chosen: HashSet<(NodeId, NodeId)> = HashSet::new();
        // Rejection sampling is fast while non-edges are plentiful; otherwise
        // enumerate them and sample by index.
        if non_edges >= 2 * n_neg && non_edges * 2 >= pairs {
            while chosen.len() < n_neg {
                let u = NodeId(rng.gen_range(0..n as u32));
                let v = NodeId(rng.gen_range(0..n as u32));
                if u == v || g.has_edge(u, v) {
                    continue;
                }
                let key = if u < v { (u, v) } else { (v, u) };
                if chosen.insert(key) {
                    instances.push(TaskInstance::link(key.0, key.1, false));
                }
            }
        } else {
            let mut all = Vec::with_capacity(non_edges);
            for u in 0..n as u32 {
                for v in u + 1..n as u32 {
                    if !g.has_edge(NodeId(u), NodeId(v)) {
                        all.push((NodeId(u), NodeId(v)));
                    }
                }
            }
            for i in rand::seq::index::sample(&mut rng, all.len(), n_neg) {
                instances.push(TaskInstance::link(all[i].0, all[i].1, false));
            }
        }
    }
    Ok(InstanceSet {
        task: TaskKind::LinkPrediction,
        instances,
    })
}

/// Samples up to `n` labeled nodes as classification instances.
pub fn build_classification_instances(
    g: &AttributedGraph,
    n: usize,
    classes: Option<Vec<String>>,
    seed: u64,
) -> InstanceSet {
    let classes = classes.unwrap_or_else(|| g.labels());
    let mut labeled: Vec<(NodeId, String)> = g
        .nodes()
        .iter()
        .filter_map(|r| {
            r.label
                .as_ref()
                .filter(|l| classes.contains(l))
                .map(|l| (r.id, l.clone()))
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labeled.shuffle(&mut rng);
    labeled.truncate(n);
    InstanceSet {
        task: TaskKind::NodeClassification { classes },
        instances: labeled
            .into_iter()
            .map(|(v, l)| TaskInstance::classification(v, l))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceOutcome {
    pub index: usize,
    pub anchors: Vec<String>,
    pub gold: String,
    pub predicted: Option<String>,
    pub correct: bool,
    pub failure: Option<String>,
    pub detail: Option<String>,
    pub searches: usize,
    pub parser_fallbacks: usize,
    pub global_fills: usize,
    pub tokens: TokenCounts,
    #[serde(skip)]
    pub retrieval_micros: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    index: usize,
    anchors: String,
    gold: &'a str,
    predicted: &'a str,
    correct: bool,
    failure: &'a str,
    searches: usize,
    parser_fallbacks: usize,
    global_fills: usize,
    think_tokens: usize,
    search_tokens: usize,
    information_tokens: usize,
    answer_tokens: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LatencySummary {
    pub retrievals: usize,
    pub mean_us: f64,
    pub median_us: f64,
    pub p95_us: f64,
}

impl LatencySummary {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return LatencySummary::default();
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 {
            s[n / 2]
        } else {
            (s[n / 2 - 1] + s[n / 2]) / 2.0
        };
        // Nearest-rank percentile.
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        LatencySummary {
            retrievals: n,
            mean_us: s.iter().sum::<f64>() / n as f64,
            median_us: median,
            p95_us: s[rank - 1],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseFigures {
    pub think: f64,
    pub search: f64,
    pub information: f64,
    pub answer: f64,
}

impl PhaseFigures {
    pub fn sum(&self) -> f64 {
        self.think + self.search + self.information + self.answer
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TokenSummary {
    pub mean: PhaseFigures,
    pub mean_total: f64,
    /// Phase totals over all instances divided by the grand total.
    pub share: PhaseFigures,
}

impl TokenSummary {
    pub fn from_counts(counts: &[TokenCounts]) -> Self {
        if counts.is_empty() {
            return TokenSummary::default();
        }
        let mut sum = TokenCounts::default();
        for c in counts {
            sum.think += c.think;
            sum.search += c.search;
            sum.information += c.information;
            sum.answer += c.answer;
        }
        let n = counts.len() as f64;
        let total = sum.total() as f64;
        let share = |x: usize| if total > 0.0 { x as f64 / total } else { 0.0 };
        TokenSummary {
            mean: PhaseFigures {
                think: sum.think as f64 / n,
                search: sum.search as f64 / n,
                information: sum.information as f64 / n,
                answer: sum.answer as f64 / n,
            },
            mean_total: total / n,
            share: PhaseFigures {
                think: share(sum.think),
                search: share(sum.search),
                information: share(sum.information),
                answer: share(sum.answer),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub traversal: Traversal,
    pub baseline: BaselineMode,
    pub latency: LatencySummary,
    pub tokens: TokenSummary,
    pub mean_searches: f64,
    /// Parser fallbacks per search.
    pub fallback_rate: f64,
    /// Recursive-traversal global fills per retrieval.
    pub fill_rate: f64,
    pub failures: BTreeMap<String, usize>,
    pub outcomes: Vec<InstanceOutcome>,
}

impl EvalReport {
    pub fn from_outcomes(traversal: Traversal, baseline: BaselineMode, outcomes: Vec<InstanceOutcome>) -> Self {
        let n = outcomes.len();
        let correct = outcomes.iter().filter(|o| o.correct).count();
        let searches: usize = outcomes.iter().map(|o| o.searches).sum();
        let fallbacks: usize = outcomes.iter().map(|o| o.parser_fallbacks).sum();
        let fills: usize = outcomes.iter().map(|o| o.global_fills).sum();
        let samples: Vec<f64> = outcomes
            .iter()
            .flat_map(|o| o.retrieval_micros.iter().copied())
            .collect();
        let mut failures = BTreeMap::new();
        for o in &outcomes {
            if let Some(f) = &o.failure {
                *failures.entry(f.clone()).or_insert(0) += 1;
            }
        }
        let counts: Vec<TokenCounts> = outcomes.iter().map(|o| o.tokens).collect();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        EvalReport {
            n,
            correct,
            accuracy: ratio(correct, n),
            traversal,
            baseline,
            latency: LatencySummary::from_samples(&samples),
            tokens: TokenSummary::from_counts(&counts),
            mean_searches: ratio(searches, n),
            fallback_rate: ratio(fallbacks, searches),
            fill_rate: ratio(fills, samples.len()),
            failures,
            outcomes,
        }
    }

    /// JSON report. Latency is wall-clock and therefore optional; without it
    /// the report is a pure function of the inputs.
    pub fn to_json(&self, include_latency: bool) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if !include_latency {
            v.as_object_mut().expect("object").remove("latency");
        }
        serde_json::to_string_pretty(&v).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for o in &self.outcomes {
            w.serialize(CsvRow {
                index: o.index,
                anchors: o.anchors.join(" "),
                gold: &o.gold,
                predicted: o.predicted.as_deref().unwrap_or(""),
                correct: o.correct,
                failure: o.failure.as_deref().unwrap_or(""),
                searches: o.searches,
                parser_fallbacks: o.parser_fallbacks,
                global_fills: o.global_fills,
                think_tokens: o.tokens.think,
                search_tokens: o.tokens.search,
                information_tokens: o.tokens.information,
                answer_tokens: o.tokens.answer,
            })
            .expect("csv row serializes");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "n={} correct={} accuracy={:.4} traversal={} baseline={:?}\n",
            self.n, self.correct, self.accuracy, self.traversal, self.baseline
        );
        let l = &self.latency;
        let _ = writeln!(
            s,
            "retrieval latency us: mean={:.1} median={:.1} p95={:.1} over {} retrievals",
            l.mean_us, l.median_us, l.p95_us, l.retrievals
        );
        let t = &self.tokens;
        let _ = writeln!(
            s,
            "token share: think={:.3} search={:.3} information={:.3} answer={:.3} (mean total {:.1})",
            t.share.think, t.share.search, t.share.information, t.share.answer, t.mean_total
        );
        let _ = writeln!(
            s,
            "mean searches={:.2} fallback rate={:.3} fill rate={:.3}",
            self.mean_searches, self.fallback_rate, self.fill_rate
        );
        for (k, v) in &self.failures {
            let _ = writeln!(s, "failures {k}: {v}");
        }
        s
    }
}

pub fn outcome_from_trace(index: usize, inst: &TaskInstance, trace: &RolloutTrace) -> InstanceOutcome {
    let (predicted, correct, failure, detail) = match &trace.outcome {
        Outcome::Answered(a) => {
            let p = match a {
                Answer::ClassLabel(c) => c.clone(),
                Answer::Link(true) => "1".into(),
                Answer::Link(false) => "0".into(),
            };
            (Some(p), inst.gold.matches(a), None, None)
        }
        Outcome::Failed { kind, detail } => (None, false, Some(kind.name().to_string()), Some(detail.clone())),
    };
    InstanceOutcome {
        index,
        anchors: trace.anchors.clone(),
        gold: inst.gold.render(),
        predicted,
        correct,
        failure,
        detail,
        searches: trace.searches.len(),
        parser_fallbacks: trace.searches.iter().filter(|s| s.fallback.is_some()).count(),
        global_fills: trace
            .searches
            .iter()
            .filter(|s| s.retrieval.as_ref().is_some_and(|r| r.fallback_used))
            .count(),
        tokens: trace.token_counts,
        retrieval_micros: trace
            .searches
            .iter()
            .filter_map(|s| s.detail.as_ref())
            .map(|r| r.elapsed.as_secs_f64() * 1e6)
            .collect(),
    }
}

/// Runs every instance through the engine, at most `in_flight` at a time.
/// Per-instance failures are recorded, never fatal.
pub fn run_eval<B: ModelBackend + ?Sized>(
    engine: &Engine<'_>,
    backend: &B,
    set: &InstanceSet,
    in_flight: usize,
) -> Result<EvalReport, EvalError> {
    if in_flight < 1 {
        return Err(EvalError::ConfigInvalid("in_flight must be >= 1".into()));
    }
    set.validate(engine.graph())?;
    let g = engine.graph();
    let run_one = |(i, inst): (usize, &TaskInstance)| -> InstanceOutcome {
        match engine.run_inference(backend, inst.anchors, &set.task, inst.mask()) {
            Ok(trace) => outcome_from_trace(i, inst, &trace),
            Err(e) => InstanceOutcome {
                index: i,
                anchors: inst
                    .anchors
                    .nodes()
                    .iter()
                    .map(|v| g.nodes()[v.index()].external_id.clone())
                    .collect(),
                gold: inst.gold.render(),
                predicted: None,
                correct: false,
                failure: Some(e.kind().to_string()),
                detail: Some(e.to_string()),
                searches: 0,
                parser_fallbacks: 0,
                global_fills: 0,
                tokens: TokenCounts::default(),
                retrieval_micros: Vec::new(),
            },
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(in_flight)
        .build()
        .map_err(|e| EvalError::ConfigInvalid(format!("thread pool: {e}")))?;
    let mut outcomes: Vec<InstanceOutcome> =
        pool.install(|| set.instances.par_iter().enumerate().map(run_one).collect());
    outcomes.sort_by_key(|o| o.index);
    let cfg = engine.rollout_config();
    Ok(EvalReport::from_outcomes(cfg.traversal, cfg.baseline, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::g0;

    #[test]
    fn link_instances_on_g0() {
        let g = g0();
        let set = build_link_instances(&g, 2, 2, 7).unwrap();
        assert_eq!(set.len(), 4);
        for inst in &set.instances {
            let Anchors::Pair(a, b) = inst.anchors else { panic!() };
            assert_ne!(a, b);
            assert_eq!(g.has_edge(a, b), inst.gold == Gold::Link(true));
            if inst.gold == Gold::Link(true) {
                assert_eq!(inst.mask(), Some((a, b)));
                let view = g.view().masking(a, b);
                assert!(!view.neighbors(a).any(|x| x == b));
            }
        }
        assert_eq!(set, build_link_instances(&g, 2, 2, 7).unwrap());
        assert!(matches!(
            build_link_instances(&g, 6, 0, 1),
            Err(EvalError::InsufficientEdges { requested: 6, available: 5 })
        ));
    }

    #[test]
    fn instance_file_round_trip() {
        let g = g0();
        let set = build_link_instances(&g, 3, 3, 1).unwrap();
        let back = InstanceSet::parse(&set.to_tsv(&g), &g, None).unwrap();
        assert_eq!(back, set);

        let cls = InstanceSet::parse("# comment\np0\tA\np3\tB\n", &g, None).unwrap();
        assert_eq!(cls.len(), 2);
        assert!(InstanceSet::parse("p0\tZ\n", &g, None).is_err());
        assert!(InstanceSet::parse("p0\tA\np1\tp2\t1\n", &g, None).is_err());
        assert!(InstanceSet::parse("nope\tA\n", &g, None).is_err());
        assert!(InstanceSet::parse("p0\tp5\t1\n", &g, None).is_err());
    }

    #[test]
    fn latency_percentiles() {
        let l = LatencySummary::from_samples(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(l.mean_us, 2.5);
        assert_eq!(l.median_us, 2.5);
        assert_eq!(l.p95_us, 4.0);
        let samples: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(LatencySummary::from_samples(&samples).p95_us, 95.0);
    }

    #[test]
    fn accuracy_and_failures() {
        let mk = |i: usize, correct: bool, failure: Option<&str>| InstanceOutcome {
            index: i,
            anchors: vec![],
            gold: "A".into(),
            predicted: None,
            correct,
            failure: failure.map(String::from),
            detail: None,
            searches: 1,
            parser_fallbacks: 0,
            global_fills: 0,
            tokens: TokenCounts {
                think: 3,
                search: 1,
                information: 5,
                answer: 1,
            },
            retrieval_micros: vec![],
        };
        let r = EvalReport::from_outcomes(
            Traversal::F,
            BaselineMode::GraphAware,
            vec![mk(0, true, None), mk(1, false, None), mk(2, true, None), mk(3, false, None)],
        );
        assert_eq!(r.accuracy, 0.5);
        assert!((r.tokens.share.sum() - 1.0).abs() < 1e-9);
        assert_eq!(r.tokens.share.information, 0.5);
        let all_fail: Vec<_> = (0..4)
            .map(|i| mk(i, false, Some("AnswerExtractionFailed")))
            .collect();
        let r = EvalReport::from_outcomes(Traversal::F, BaselineMode::GraphAware, all_fail);
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.failures["AnswerExtractionFailed"], 4);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("index,anchors,gold,predicted,correct,failure"));
    }
}
