mod common;

use graphsearch::embedding::{cos_sim, Vector};
use graphsearch::graph::GraphBuilder;
use graphsearch::ppr::{personalized_pagerank, PprConfig};
use graphsearch::query::{extract_spans, parse_search_block, AnchorSelector, SearchSpace, StructuredQuery, Traversal};
use graphsearch::retriever::top_k;
use graphsearch::rollout::count_tokens;
use graphsearch::{AttributedGraph, NodeId};
use proptest::prelude::*;
use regex::Regex;

use common::*;

fn graph_from(n: usize, edges: &[(usize, usize)]) -> AttributedGraph {
    let mut b = GraphBuilder::new();
    for i in 0..n {
        b.add_node(format!("v{i}"), None, format!("node {i}")).unwrap();
    }
    for &(u, v) in edges {
        b.add_edge(NodeId((u % n) as u32), NodeId((v % n) as u32));
    }
    b.build().unwrap().0
}

fn small_graph() -> impl Strategy<Value = AttributedGraph> {
    (1usize..40).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n), 0..n * 3).prop_map(move |e| graph_from(n, &e))
    })
}

fn space() -> impl Strategy<Value = SearchSpace> {
    prop_oneof![
        Just(SearchSpace::Local(1)),
        Just(SearchSpace::Local(2)),
        Just(SearchSpace::Global),
        Just(SearchSpace::Attribute),
    ]
}

proptest! {
    #[test]
    fn hops_match_distances(g in small_graph(), a in any::<prop::sample::Index>(), h in 1u32..5) {
        let a = a.index(g.node_count());
        let dist = apsp(&g, None);
        let mut hood = g.view().hop_neighborhood(NodeId(a as u32), h).unwrap();
        hood.sort();
        prop_assert_eq!(hood, within(&dist, a, 1, h));
        let mut ring = g.view().exact_hop_ring(NodeId(a as u32), h).unwrap();
        ring.sort();
        prop_assert_eq!(ring, within(&dist, a, h, h));
    }

    #[test]
    fn ppr_is_a_distribution_near_the_fixed_point(g in small_graph(), a in any::<prop::sample::Index>()) {
        let a = NodeId(a.index(g.node_count()) as u32);
        let s = personalized_pagerank(g.view(), a, &PprConfig::default()).unwrap();
        let sum: f64 = s.scores.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        prop_assert!(s.scores.iter().all(|&x| x >= 0.0));
        let want = dense_ppr(&g, a, 0.85);
        for (x, y) in s.scores.iter().zip(&want) {
            prop_assert!((x - y).abs() <= 1e-6, "{} vs {}", x, y);
        }
    }

    #[test]
    fn dsl_round_trip(
        space in space(),
        second in any::<bool>(),
        text in "[a-z0-9][a-zA-Z0-9 ,=(){}\"'\\\\-]{0,30}[a-z]",
    ) {
        let sel = if second { AnchorSelector::Second } else { AnchorSelector::First };
        let q = StructuredQuery::new(space, text).with_anchor(sel);
        let back = parse_search_block(&q.to_dsl(), Traversal::F).unwrap();
        prop_assert_eq!(back.query, q);
        prop_assert!(back.fallback.is_none());
    }

    #[test]
    fn structural_garbage_never_errors_when_text_is_present(mode in "[a-z]{0,8}", hop in "[-a-z0-9.]{0,4}") {
        let raw = format!("mode={mode}, hop={hop}, query=\"gibbs sampler\"");
        let p = parse_search_block(&raw, Traversal::F).unwrap();
        prop_assert_eq!(p.query.text, "gibbs sampler");
        if p.fallback.is_some() {
            prop_assert_eq!(p.query.space, SearchSpace::Local(1));
        }
    }

    #[test]
    fn token_count_matches_regex(s in "[a-zA-Z0-9_ \t\n.,;:!?<>/=\"'()éü-]{0,80}") {
        let re = Regex::new(r"\w+|[^\w\s]").unwrap();
        prop_assert_eq!(count_tokens(&s), re.find_iter(&s).count());
    }

    #[test]
    fn token_count_is_additive_across_whitespace(a in "[a-z<>/ ]{0,30}", b in "[a-z<>/ ]{0,30}") {
        prop_assert_eq!(count_tokens(&format!("{a} {b}")), count_tokens(&a) + count_tokens(&b));
    }

    #[test]
    fn complete_spans_are_stable_under_extension(
        parts in prop::collection::vec((0usize..4, "[a-z ]{0,12}"), 1..8),
        cut in any::<prop::sample::Index>(),
    ) {
        let tags = ["think", "search", "information", "answer"];
        let full: String = parts
            .iter()
            .map(|(t, body)| format!("<{0}>{1}</{0}>\n", tags[*t], body))
            .collect();
        let all = extract_spans(&full);
        prop_assert_eq!(all.len(), parts.len());
        let mut at = cut.index(full.len() + 1);
        while !full.is_char_boundary(at) {
            at -= 1;
        }
        let prefix = extract_spans(&full[..at]);
        let complete: Vec<_> = prefix.iter().filter(|s| s.complete).collect();
        prop_assert!(complete.len() <= all.len());
        for (p, f) in complete.iter().zip(&all) {
            prop_assert_eq!(*p, f);
        }
    }

    #[test]
    fn cosine_symmetric_and_scale_invariant(
        v in prop::collection::vec(-10.0f64..10.0, 8),
        w in prop::collection::vec(-10.0f64..10.0, 8),
        c in 0.01f64..100.0,
    ) {
        let (a, b) = (Vector::new(v), Vector::new(w));
        prop_assume!(a.norm() > 1e-6 && b.norm() > 1e-6);
        let ab = cos_sim(&a, &b).unwrap();
        prop_assert_eq!(ab, cos_sim(&b, &a).unwrap());
        prop_assert!((ab - cos_sim(&a.scaled(c), &b).unwrap()).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn top_k_equals_full_sort(
        scores in prop::collection::vec(0u8..6, 0..60),
        k in 1usize..10,
    ) {
        // Coarse scores force ties.
        let scored: Vec<(NodeId, f64)> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| (NodeId(i as u32), f64::from(s) / 4.0))
            .collect();
        let got = top_k(scored.clone(), k);
        prop_assert_eq!(got.entries, brute_top_k(scored, k));
    }
}
