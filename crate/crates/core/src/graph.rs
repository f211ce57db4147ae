//! Attributed graph storage, ingestion and hop neighborhoods.
//!
//! Node ids are densified to `0..N` in file order at ingestion. Edges are
//! stored as sorted, deduplicated adjacency lists; undirected graphs keep
//! both directions.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::tokenize;

/// Dense node identifier, `0..N` after ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    /// Attribute text (title/description).
    pub text: String,
    /// Class name; never rendered into prompts or retrieved evidence.
    pub label: Option<String>,
    pub external_id: String,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("MalformedRecord: {file} line {line}: {reason}")]
    MalformedRecord {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("DanglingEdge: line {line} references unknown node '{external_id}'")]
    DanglingEdge { line: usize, external_id: String },
    #[error("EmptyGraph: nodes file has no records")]
    EmptyGraph,
    #[error("UnknownNode: {0}")]
    UnknownNode(String),
    #[error("Io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("GraphFormat: {0}")]
    Format(String),
}

impl GraphError {
    pub fn kind(&self) -> &'static str {
        match self {
            GraphError::MalformedRecord { .. } => "MalformedRecord",
            GraphError::DanglingEdge { .. } => "DanglingEdge",
            GraphError::EmptyGraph => "EmptyGraph",
            GraphError::UnknownNode(_) => "UnknownNode",
            GraphError::Io { .. } => "Io",
            GraphError::Format(_) => "GraphFormat",
        }
    }
}

/// Counters produced while building a graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub nodes: usize,
    pub edges: usize,
    pub dropped_self_loops: usize,
    pub collapsed_duplicates: usize,
}

impl IngestReport {
    pub fn to_text(&self) -> String {
        format!(
            "nodes={}\nedges={}\ndropped_self_loops={}\ncollapsed_duplicates={}\n",
            self.nodes, self.edges, self.dropped_self_loops, self.collapsed_duplicates
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributedGraph {
    nodes: Vec<NodeRecord>,
    adjacency: Vec<Vec<NodeId>>,
    edge_count: usize,
    directed: bool,
    #[serde(skip)]
    index: HashMap<String, NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub degrees: Vec<usize>,
    pub avg_degree: f64,
}

impl DegreeStats {
    pub fn degree(&self, v: NodeId) -> usize {
        self.degrees[v.index()]
    }
}

/// Accumulates nodes and edges, then validates into an [`AttributedGraph`].
#[derive(Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<NodeRecord>,
    index: HashMap<String, NodeId>,
    edges: Vec<(NodeId, NodeId)>,
    directed: bool,
    report: IngestReport,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn directed(mut self, directed: bool) -> Self {
        self.directed = directed;
        self
    }

    /// Adds a node and returns its dense id. Rejects duplicate external ids
    /// and texts with no tokens.
    pub fn add_node(
        &mut self,
        external_id: impl Into<String>,
        label: Option<String>,
        text: impl Into<String>,
    ) -> Result<NodeId, String> {
        let external_id = external_id.into();
        let text = text.into().trim().to_string();
        if external_id.is_empty() {
            return Err("empty external id".into());
        }
        if self.index.contains_key(&external_id) {
            return Err(format!("duplicate node id '{external_id}'"));
        }
        if tokenize(&text).next().is_none() {
            return Err(format!("node '{external_id}' has no attribute tokens"));
        }
        let id = NodeId(self.nodes.len() as u32);
        self.index.insert(external_id.clone(), id);
        self.nodes.push(NodeRecord {
            id,
            text,
            label,
            external_id,
        });
        Ok(id)
    }

    pub fn lookup(&self, external_id: &str) -> Option<NodeId> {
        self.index.get(external_id).copied()
    }

    /// Records an edge between existing dense ids. Self-loops are counted and dropped.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId) {
        if u == v {
            self.report.dropped_self_loops += 1;
            return;
        }
        self.edges.push((u, v));
    }

    pub fn build(self) -> Result<(AttributedGraph, IngestReport), GraphError> {
        let GraphBuilder {
            nodes,
            index,
            edges,
            directed,
            mut report,
        } = self;
        if nodes.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        let n = nodes.len();
        let mut pairs: Vec<(NodeId, NodeId)> = edges
            .into_iter()
            .map(|(u, v)| if directed || u < v { (u, v) } else { (v, u) })
            .collect();
        let raw = pairs.len();
        pairs.sort_unstable();
        pairs.dedup();
        report.collapsed_duplicates = raw - pairs.len();

        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &pairs {
            adjacency[u.index()].push(v);
            if !directed {
                adjacency[v.index()].push(u);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        report.nodes = n;
        report.edges = pairs.len();
        let graph = AttributedGraph {
            nodes,
            adjacency,
            edge_count: pairs.len(),
            directed,
            index,
        };
        Ok((graph, report))
    }
}

impl AttributedGraph {
    /// Reads the tab-separated nodes and edges files.
    pub fn load(
        nodes_path: impl AsRef<Path>,
        edges_path: impl AsRef<Path>,
    ) -> Result<(Self, IngestReport), GraphError> {
        let nodes_path = nodes_path.as_ref();
        let edges_path = edges_path.as_ref();
        let nodes_text = read_to_string(nodes_path)?;
        let edges_text = read_to_string(edges_path)?;
        Self::parse(
            &nodes_text,
            &edges_text,
            &nodes_path.display().to_string(),
            &edges_path.display().to_string(),
        )
    }

    /// Parses node and edge records from in-memory text.
    pub fn parse(
        nodes_text: &str,
        edges_text: &str,
        nodes_name: &str,
        edges_name: &str,
    ) -> Result<(Self, IngestReport), GraphError> {
        let mut builder = GraphBuilder::new();
        for (i, line) in nodes_text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.splitn(3, '\t');
            let (Some(ext), Some(label), Some(text)) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(GraphError::MalformedRecord {
                    file: nodes_name.to_string(),
                    line: line_no,
                    reason: "expected 3 tab-separated fields".into(),
                });
            };
            let label = match label.trim() {
                "" | "-" => None,
                l => Some(l.to_string()),
            };
            builder
                .add_node(ext.trim(), label, text)
                .map_err(|reason| GraphError::MalformedRecord {
                    file: nodes_name.to_string(),
                    line: line_no,
                    reason,
                })?;
        }
        if builder.nodes.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        for (i, line) in edges_text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
                return Err(GraphError::MalformedRecord {
                    file: edges_name.to_string(),
                    line: line_no,
                    reason: "expected 2 tab-separated node ids".into(),
                });
            }
            let resolve = |ext: &str| {
                builder
                    .lookup(ext)
                    .ok_or_else(|| GraphError::DanglingEdge {
                        line: line_no,
                        external_id: ext.to_string(),
                    })
            };
            let u = resolve(fields[0])?;
            let v = resolve(fields[1])?;
            builder.add_edge(u, v);
        }
        builder.build()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn node(&self, v: NodeId) -> Result<&NodeRecord, GraphError> {
        self.nodes
            .get(v.index())
            .ok_or_else(|| GraphError::UnknownNode(v.to_string()))
    }

    pub fn text(&self, v: NodeId) -> &str {
        &self.nodes[v.index()].text
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adjacency[v.index()]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency[v.index()].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency
            .get(u.index())
            .is_some_and(|list| list.binary_search(&v).is_ok())
    }

    pub fn lookup(&self, external_id: &str) -> Option<NodeId> {
        self.index.get(external_id).copied()
    }

    pub fn resolve(&self, external_id: &str) -> Result<NodeId, GraphError> {
        self.lookup(external_id)
            .ok_or_else(|| GraphError::UnknownNode(external_id.to_string()))
    }

    pub fn check(&self, v: NodeId) -> Result<NodeId, GraphError> {
        if v.index() < self.nodes.len() {
            Ok(v)
        } else {
            Err(GraphError::UnknownNode(v.to_string()))
        }
    }

    /// Ordered, deduplicated class names present in the graph.
    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.nodes.iter().filter_map(|n| n.label.clone()).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    pub fn view(&self) -> GraphView<'_> {
        GraphView {
            graph: self,
            mask: None,
        }
    }

    pub fn degree_stats(&self) -> DegreeStats {
        self.view().degree_stats()
    }

    /// Undirected edge list with `u < v` (or `(u, v)` arcs for directed graphs).
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        let directed = self.directed;
        self.adjacency.iter().enumerate().flat_map(move |(u, list)| {
            let u = NodeId(u as u32);
            list.iter()
                .filter(move |&&v| directed || u < v)
                .map(move |&v| (u, v))
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, GraphError> {
        bincode::serialize(&(GRAPH_FORMAT_VERSION, self))
            .map_err(|e| GraphError::Format(e.to_string()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GraphError> {
        let (version, mut graph): (u32, AttributedGraph) =
            bincode::deserialize(bytes).map_err(|e| GraphError::Format(e.to_string()))?;
        if version != GRAPH_FORMAT_VERSION {
            return Err(GraphError::Format(format!(
                "graph.bin format version {version}, expected {GRAPH_FORMAT_VERSION}"
            )));
        }
        graph.index = graph
            .nodes
            .iter()
            .map(|n| (n.external_id.clone(), n.id))
            .collect();
        Ok(graph)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|source| GraphError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| GraphError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// Replaces the attribute text of one node. Used to build perturbed copies in tests.
    pub fn with_text(&self, v: NodeId, text: impl Into<String>) -> Self {
        let mut g = self.clone();
        g.nodes[v.index()].text = text.into();
        g
    }
}

pub const GRAPH_FORMAT_VERSION: u32 = 1;

fn read_to_string(path: &Path) -> Result<String, GraphError> {
    fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Read-only view of a graph, optionally hiding one undirected edge.
///
/// Link-prediction rollouts for a positive pair run against a view masking
/// that pair's edge, so no pool can reach the answer through it.
#[derive(Debug, Clone, Copy)]
pub struct GraphView<'a> {
    graph: &'a AttributedGraph,
    mask: Option<(NodeId, NodeId)>,
}

impl<'a> GraphView<'a> {
    pub fn masking(self, u: NodeId, v: NodeId) -> Self {
        GraphView {
            graph: self.graph,
            mask: Some((u, v)),
        }
    }

    pub fn graph(&self) -> &'a AttributedGraph {
        self.graph
    }

    pub fn mask(&self) -> Option<(NodeId, NodeId)> {
        self.mask
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    fn masked(&self, u: NodeId, v: NodeId) -> bool {
        match self.mask {
            Some((a, b)) => (u == a && v == b) || (!self.graph.directed && u == b && v == a),
            None => false,
        }
    }

    pub fn neighbors(&self, u: NodeId) -> impl Iterator<Item = NodeId> + 'a {
        let this = *self;
        self.graph.adjacency[u.index()]
            .iter()
            .copied()
            .filter(move |&v| !this.masked(u, v))
    }

    pub fn degree(&self, u: NodeId) -> usize {
        let full = self.graph.degree(u);
        match self.mask {
            Some(_) => full - self.graph.neighbors(u).iter().filter(|&&v| self.masked(u, v)).count(),
            None => full,
        }
    }

    pub fn edge_count(&self) -> usize {
        match self.mask {
            Some((a, b)) if self.graph.has_edge(a, b) => self.graph.edge_count - 1,
            _ => self.graph.edge_count,
        }
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let n = self.node_count();
        let degrees: Vec<usize> = (0..n).map(|u| self.degree(NodeId(u as u32))).collect();
        let avg_degree = if n == 0 {
            0.0
        } else {
            degrees.iter().sum::<usize>() as f64 / n as f64
        };
        DegreeStats {
            degrees,
            avg_degree,
        }
    }

    /// Breadth-first levels `1..=max_hop` from `anchor`; `levels[i]` holds the
    /// nodes at distance `i + 1`, sorted ascending.
    pub fn bfs_levels(&self, anchor: NodeId, max_hop: u32) -> Result<Vec<Vec<NodeId>>, GraphError> {
        self.graph.check(anchor)?;
        let mut visited = VisitedSet::new(self.node_count());
        visited.insert(anchor);
        let mut levels = Vec::with_capacity(max_hop as usize);
        let mut frontier = vec![anchor];
        for _ in 0..max_hop {
            let mut next = Vec::new();
            for &u in &frontier {
                for v in self.neighbors(u) {
                    if visited.insert(v) {
                        next.push(v);
                    }
                }
            }
            next.sort_unstable();
            frontier = next.clone();
            levels.push(next);
            if frontier.is_empty() {
                break;
            }
        }
        levels.resize(max_hop as usize, Vec::new());
        Ok(levels)
    }

    /// Nodes within `hops` of `anchor`, anchor excluded, sorted ascending.
    pub fn hop_neighborhood(&self, anchor: NodeId, hops: u32) -> Result<Vec<NodeId>, GraphError> {
        if hops == 1 {
            self.graph.check(anchor)?;
            return Ok(self.neighbors(anchor).collect());
        }
        let mut all: Vec<NodeId> = self.bfs_levels(anchor, hops)?.into_iter().flatten().collect();
        all.sort_unstable();
        Ok(all)
    }

    /// Nodes at shortest-path distance exactly `hop` from `anchor`.
    pub fn exact_hop_ring(&self, anchor: NodeId, hop: u32) -> Result<Vec<NodeId>, GraphError> {
        if hop == 0 {
            self.graph.check(anchor)?;
            return Ok(vec![anchor]);
        }
        Ok(self
            .bfs_levels(anchor, hop)?
            .pop()
            .unwrap_or_default())
    }
}

struct VisitedSet {
    words: Vec<u64>,
}

impl VisitedSet {
    fn new(n: usize) -> Self {
        VisitedSet {
            words: vec![0; n.div_ceil(64)],
        }
    }

    /// Returns true if `v` was not yet present.
    #[inline]
    fn insert(&mut self, v: NodeId) -> bool {
        let (w, b) = (v.index() / 64, v.index() % 64);
        let bit = 1u64 << b;
        let fresh = self.words[w] & bit == 0;
        self.words[w] |= bit;
        fresh
    }
}

pub fn hop_neighborhood(
    g: &AttributedGraph,
    anchor: NodeId,
    hops: u32,
) -> Result<Vec<NodeId>, GraphError> {
    g.view().hop_neighborhood(anchor, hops)
}

pub fn exact_hop_ring(
    g: &AttributedGraph,
    anchor: NodeId,
    hop: u32,
) -> Result<Vec<NodeId>, GraphError> {
    g.view().exact_hop_ring(anchor, hop)
}

pub fn degree_stats(g: &AttributedGraph) -> DegreeStats {
    g.degree_stats()
}
