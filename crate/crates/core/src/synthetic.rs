//! Seeded synthetic graphs for benchmarks and end-to-end checks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{AttributedGraph, GraphBuilder, NodeId};

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn pseudo_word(rng: &mut impl Rng, syllables: usize) -> String {
    let mut w = String::with_capacity(syllables * 2);
    for _ in 0..syllables {
        w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
    }
    w
}

/// `n` distinct pseudo-words, none containing any of `avoid` (lowercased).
fn vocabulary(rng: &mut impl Rng, n: usize, avoid: &[String]) -> Vec<String> {
    let avoid: Vec<String> = avoid.iter().map(|a| a.to_lowercase()).collect();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = pseudo_word(rng, 3 + out.len() % 2);
        if avoid.iter().any(|a| w.contains(a.as_str())) || !seen.insert(w.clone()) {
            continue;
        }
        out.push(w);
    }
    out
}

/// Random graph with `n` nodes and roughly `avg_degree` average degree:
/// every node proposes `avg_degree / 2` uniform partners. Each node's text is
/// 8 to 15 words from a shared pseudo-word vocabulary.
pub fn synthetic_graph(n: usize, avg_degree: f64, seed: u64) -> AttributedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = vocabulary(&mut rng, 5000, &[]);
    let mut b = GraphBuilder::new();
    for i in 0..n {
        let len = rng.gen_range(8..=15);
        let words: Vec<&str> = (0..len)
            .map(|_| vocab[rng.gen_range(0..vocab.len())].as_str())
            .collect();
        b.add_node(format!("s{i}"), None, words.join(" "))
            .expect("fresh ids and non-empty text");
    }
    if n > 1 {
        let per_node = avg_degree / 2.0;
        for u in 0..n as u32 {
            // Fractional part handled stochastically.
            let mut m = per_node.floor() as usize;
            if rng.gen::<f64>() < per_node.fract() {
                m += 1;
            }
            for _ in 0..m {
                let v = rng.gen_range(0..n as u32 - 1);
                let v = if v >= u { v + 1 } else { v };
                b.add_edge(NodeId(u), NodeId(v));
            }
        }
    }
    b.build().expect("non-empty graph").0
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedPartition {
    pub class_names: Vec<String>,
    pub per_class: usize,
    pub avg_degree: f64,
    /// Probability that an edge joins two nodes of the same class.
    pub homophily: f64,
    /// Class-specific marker words available per class.
    pub markers_per_class: usize,
    /// Class-neutral words per node text.
    pub noise_words: usize,
    pub seed: u64,
}

impl Default for PlantedPartition {
    fn default() -> Self {
        PlantedPartition {
            class_names: vec!["Ocean".into(), "Desert".into(), "Forest".into()],
            per_class: 20,
            avg_degree: 6.0,
            homophily: 0.9,
            markers_per_class: 20,
            noise_words: 10,
            seed: 0,
        }
    }
}

/// A planted-partition graph and the marker vocabulary of each class.
#[derive(Debug, Clone)]
pub struct PlantedGraph {
    pub graph: AttributedGraph,
    /// `markers[c]` are the words only class `c` uses.
    pub markers: Vec<Vec<String>>,
}

impl PlantedGraph {
    /// Class index whose markers occur most often in `text`; ties go to the
    /// lower index, no marker at all gives `None`.
    pub fn marker_class(&self, text: &str) -> Option<usize> {
        let mut counts = vec![0usize; self.markers.len()];
        for token in crate::embedding::tokenize(text) {
            for (c, words) in self.markers.iter().enumerate() {
                if words.contains(&token) {
                    counts[c] += 1;
                }
            }
        }
        let best = *counts.iter().max()?;
        if best == 0 {
            return None;
        }
        counts.iter().position(|&x| x == best)
    }
}

/// Nodes of class `c` are `c * per_class ..`. Each text carries one marker
/// word of its class among class-neutral noise words. Every node gets at
/// least one edge.
pub fn planted_partition(p: &PlantedPartition) -> PlantedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let k = p.class_names.len();
    let n = k * p.per_class;
    let words = vocabulary(&mut rng, k * p.markers_per_class + 400, &p.class_names);
    let markers: Vec<Vec<String>> = (0..k)
        .map(|c| words[c * p.markers_per_class..(c + 1) * p.markers_per_class].to_vec())
        .collect();
    let noise = &words[k * p.markers_per_class..];

    let mut b = GraphBuilder::new();
    for v in 0..n {
        let c = v / p.per_class;
        let mut text: Vec<&str> = (0..p.noise_words)
            .map(|_| noise[rng.gen_range(0..noise.len())].as_str())
            .collect();
        text.push(markers[c][rng.gen_range(0..p.markers_per_class)].as_str());
        text.shuffle(&mut rng);
        b.add_node(format!("v{v}"), Some(p.class_names[c].clone()), text.join(" "))
            .expect("fresh ids and non-empty text");
    }
    let class_of = |v: u32| v as usize / p.per_class;
    let members = |c: usize| (c * p.per_class) as u32..((c + 1) * p.per_class) as u32;
    let target_edges = (p.avg_degree * n as f64 / 2.0).round() as usize;
    let mut degree = vec![0usize; n];
    let mut add = |b: &mut GraphBuilder, rng: &mut ChaCha8Rng, u: u32| {
        let c = class_of(u);
        let v = if k == 1 || rng.gen::<f64>() < p.homophily {
            loop {
                let v = rng.gen_range(members(c));
                if v != u {
                    break v;
                }
            }
        } else {
            let mut other = rng.gen_range(0..k - 1);
            if other >= c {
                other += 1;
            }
            rng.gen_range(members(other))
        };
        b.add_edge(NodeId(u), NodeId(v));
        degree[u as usize] += 1;
        degree[v as usize] += 1;
    };
    for u in 0..n as u32 {
        add(&mut b, &mut rng, u);
    }
    for _ in n..target_edges {
        let u = rng.gen_range(0..n as u32);
        add(&mut b, &mut rng, u);
    }
    PlantedGraph {
        graph: b.build().expect("non-empty graph").0,
        markers,
    }
}
