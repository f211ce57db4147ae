//! Independent oracles shared by the integration tests. Nothing here calls
//! into the ranking, traversal or PageRank code it is used to check.

#![allow(clippy::needless_range_loop)]

#![allow(dead_code)]

use graphsearch::embedding::EmbeddingTable;
use graphsearch::graph::GraphBuilder;
use graphsearch::{AttributedGraph, NodeId};
use rand::Rng;

pub const WORDS: &[&str] = &[
    "gibbs", "sampler", "markov", "chain", "protein", "folding", "neural", "network", "graph",
    "database", "survey", "deep", "learning", "structure", "prediction", "monte", "carlo",
    "adaptive", "proposal", "convergence", "diagnostic", "kernel", "spectral", "cluster",
    "bayes", "inference", "variational", "random", "walk", "citation",
];

pub fn random_text(rng: &mut impl Rng, max_words: usize) -> String {
    let n = rng.gen_range(1..=max_words);
    (0..n)
        .map(|_| WORDS[rng.gen_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Erdos-Renyi style graph with `n` nodes and edge probability `p`. Small
/// vocabulary so that exact score ties happen.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> AttributedGraph {
    let mut b = GraphBuilder::new();
    for i in 0..n {
        let label = ["x", "y", "z"][rng.gen_range(0..3)].to_string();
        b.add_node(format!("n{i}"), Some(label), random_text(rng, 5))
            .unwrap();
    }
    for u in 0..n as u32 {
        for v in (u + 1)..n as u32 {
            if rng.gen::<f64>() < p {
                b.add_edge(NodeId(u), NodeId(v));
            }
        }
    }
    b.build().unwrap().0
}

pub fn edge_list(g: &AttributedGraph) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for u in 0..g.node_count() {
        for &v in g.neighbors(NodeId(u as u32)) {
            if u < v.index() {
                out.push((u, v.index()));
            }
        }
    }
    out
}

pub const INF: u32 = u32::MAX;

/// Floyd-Warshall distances, with `mask` removed from the edge set.
pub fn apsp(g: &AttributedGraph, mask: Option<(NodeId, NodeId)>) -> Vec<Vec<u32>> {
    let n = g.node_count();
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    let masked = |u: usize, v: usize| match mask {
        Some((a, b)) => (a.index() == u && b.index() == v) || (a.index() == v && b.index() == u),
        None => false,
    };
    for (u, v) in edge_list(g) {
        if !masked(u, v) {
            d[u][v] = 1;
            d[v][u] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k] == INF {
                continue;
            }
            for j in 0..n {
                if d[k][j] != INF && d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Nodes at distance `lo..=hi` from `a`, ascending.
pub fn within(dist: &[Vec<u32>], a: usize, lo: u32, hi: u32) -> Vec<NodeId> {
    (0..dist.len())
        .filter(|&v| dist[a][v] != INF && dist[a][v] >= lo && dist[a][v] <= hi)
        .map(|v| NodeId(v as u32))
        .collect()
}

/// Stationary personalized PageRank by direct solve of
/// `(I - d W^T - d e_a 1_D^T) p = (1 - d) e_a`, where `D` is the set of
/// dangling nodes whose mass returns to the anchor.
pub fn dense_ppr(g: &AttributedGraph, anchor: NodeId, d: f64) -> Vec<f64> {
    let n = g.node_count();
    let a = anchor.index();
    let mut m = vec![vec![0.0f64; n + 1]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for u in 0..n {
        let nb = g.neighbors(NodeId(u as u32));
        if nb.is_empty() {
            m[a][u] -= d;
        } else {
            let w = 1.0 / nb.len() as f64;
            for v in nb {
                m[v.index()][u] -= d * w;
            }
        }
    }
    m[a][n] = 1.0 - d;
    solve(m)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
pub fn solve(mut m: Vec<Vec<f64>>) -> Vec<f64> {
    let n = m.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        for row in col + 1..n {
            let f = m[row][col] / p;
            if f != 0.0 {
                for k in col..=n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = m[i][n];
        for k in i + 1..n {
            s -= m[i][k] * x[k];
        }
        x[i] = s / m[i][i];
    }
    x
}

/// Sums in four lanes by index modulo 4, combined as `(l0 + l1) + (l2 + l3)`.
/// The library uses the same order, which keeps exact ties exact.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut lanes = [0.0f64; 4];
    for (i, (p, q)) in x.iter().zip(y).enumerate() {
        lanes[i % 4] += p * q;
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3])
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Brute-force top-k: full sort by score descending, then id ascending.
pub fn brute_top_k(mut scored: Vec<(NodeId, f64)>, k: usize) -> Vec<(NodeId, f64)> {
    scored.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    scored.truncate(k);
    scored
}

pub fn hybrid(table: &EmbeddingTable, v: NodeId, anchor: NodeId, q: &[f64], alpha: f64) -> f64 {
    let to_anchor = if alpha > 0.0 { cosine(table.row(v), table.row(anchor)) } else { 0.0 };
    let to_query = if alpha < 1.0 { cosine(table.row(v), q) } else { 0.0 };
    alpha * to_anchor + (1.0 - alpha) * to_query
}

/// Rebuilds `g` from scratch with the edge `{u, v}` left out.
pub fn without_edge(g: &AttributedGraph, u: NodeId, v: NodeId) -> AttributedGraph {
    let mut b = GraphBuilder::new();
    for r in g.nodes() {
        b.add_node(r.external_id.clone(), r.label.clone(), r.text.clone())
            .unwrap();
    }
    for (a, c) in edge_list(g) {
        let hit = (a == u.index() && c == v.index()) || (a == v.index() && c == u.index());
        if !hit {
            b.add_edge(NodeId(a as u32), NodeId(c as u32));
        }
    }
    b.build().unwrap().0
}
