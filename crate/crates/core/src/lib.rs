//! Graph-grounded retrieval for agentic reasoning over text-attributed graphs.

pub mod bench;
pub mod embedding;
pub mod eval;
pub mod graph;
pub mod index;
pub mod ppr;
pub mod query;
pub mod retriever;
pub mod rollout;
pub mod synthetic;

pub use graph::{AttributedGraph, GraphView, NodeId};
