//! Per-retrieval latency: graph-aware candidate pruning against a
//! whole-corpus scan.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::embedding::tokenize;
use crate::graph::NodeId;
use crate::query::{SearchSpace, StructuredQuery, Traversal};
use crate::retriever::{Anchors, BaselineMode, RetrieveError, Retriever, TraversalState};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeStats {
    pub mode: BaselineMode,
    pub mean_us: f64,
    pub scored_mean: f64,
    pub scored_min: usize,
    pub scored_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub n_nodes: usize,
    pub n_queries: usize,
    pub space: String,
    pub first: ModeStats,
    pub second: ModeStats,
    /// Mean latency of `second` over mean latency of `first`.
    pub speedup: f64,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bench report serializes")
    }

    pub fn summary(&self) -> String {
        let line = |s: &ModeStats| {
            format!(
                "{:?}: mean {:.1} us, scored nodes mean {:.1} (min {}, max {})",
                s.mode, s.mean_us, s.scored_mean, s.scored_min, s.scored_max
            )
        };
        format!(
            "nodes={} queries={} space={}\n{}\n{}\nspeedup={:.2}x\n",
            self.n_nodes,
            self.n_queries,
            self.space,
            line(&self.first),
            line(&self.second),
            self.speedup
        )
    }
}

/// One benchmark query: an anchor and query text drawn from its own words.
pub fn bench_queries(retriever: &Retriever<'_>, n_queries: usize, seed: u64) -> Vec<(NodeId, String)> {
    let g = retriever.view().graph();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_queries)
        .map(|_| {
            let a = NodeId(rng.gen_range(0..g.node_count() as u32));
            let words: Vec<String> = tokenize(g.text(a)).take(3).collect();
            (a, words.join(" "))
        })
        .collect()
}

fn run_mode(
    retriever: &Retriever<'_>,
    mode: BaselineMode,
    space: SearchSpace,
    queries: &[(NodeId, String)],
) -> Result<ModeStats, RetrieveError> {
    let mut total = Duration::ZERO;
    let (mut sum, mut min, mut max) = (0usize, usize::MAX, 0usize);
    for (a, text) in queries {
        let q = StructuredQuery::new(space, text.clone());
        let mut state = TraversalState::new(Traversal::F);
        let r = retriever.retrieve_with(mode, &Anchors::Single(*a), &q, &mut state)?;
        total += r.elapsed;
        sum += r.scored;
        min = min.min(r.scored);
        max = max.max(r.scored);
    }
    let n = queries.len().max(1) as f64;
    Ok(ModeStats {
        mode,
        mean_us: total.as_secs_f64() * 1e6 / n,
        scored_mean: sum as f64 / n,
        scored_min: if queries.is_empty() { 0 } else { min },
        scored_max: max,
    })
}

/// Issues the same `(anchor, query)` pairs through both modes and compares
/// mean per-retrieval latency. Graph-aware retrieval uses `space`.
pub fn bench_retrieval(
    retriever: &Retriever<'_>,
    n_queries: usize,
    modes: (BaselineMode, BaselineMode),
    space: SearchSpace,
    seed: u64,
) -> Result<BenchReport, RetrieveError> {
    let queries = bench_queries(retriever, n_queries, seed);
    // One untimed pass warms caches (PPR pools, pages) for both sides.
    let warm: Vec<_> = queries.iter().take(16).cloned().collect();
    run_mode(retriever, modes.0, space, &warm)?;
    run_mode(retriever, modes.1, space, &warm)?;
    let first = run_mode(retriever, modes.0, space, &queries)?;
    let second = run_mode(retriever, modes.1, space, &queries)?;
    let speedup = if first.mean_us > 0.0 {
        second.mean_us / first.mean_us
    } else {
        f64::INFINITY
    };
    Ok(BenchReport {
        n_nodes: retriever.view().node_count(),
        n_queries,
        space: space.to_string(),
        first,
        second,
        speedup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EncoderConfig;
    use crate::ppr::{PprCache, PprConfig};
    use crate::retriever::RetrieverConfig;
    use crate::synthetic::synthetic_graph;

    #[test]
    fn scored_counts_and_control() {
        let g = synthetic_graph(3000, 20.0, 1);
        let enc = EncoderConfig::default();
        let table = enc.corpus_embeddings(&g).unwrap();
        let cache = PprCache::in_memory();
        let r = Retriever::new(
            g.view(),
            &table,
            &enc,
            RetrieverConfig::for_traversal(Traversal::F),
            PprConfig::default(),
            &cache,
        )
        .unwrap();
        let rep = bench_retrieval(
            &r,
            50,
            (BaselineMode::GraphAware, BaselineMode::StructureAgnostic),
            SearchSpace::Local(1),
            9,
        )
        .unwrap();
        assert_eq!(rep.second.scored_min, 2999);
        assert_eq!(rep.second.scored_max, 2999);
        assert!(rep.first.scored_max < 100);
        assert!(rep.first.mean_us > 0.0);
        let same = bench_retrieval(
            &r,
            50,
            (BaselineMode::GraphAware, BaselineMode::GraphAware),
            SearchSpace::Local(1),
            9,
        )
        .unwrap();
        assert_eq!(same.first.scored_mean, same.second.scored_mean);
    }
}
