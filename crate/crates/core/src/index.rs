//! On-disk index directory.
//!
//! ```text
//! <dir>/graph.bin             versioned bincode graph
//! <dir>/ingest-report.txt     counts from ingestion
//! <dir>/embeddings.bin        row-major little-endian f64 vectors
//! <dir>/embeddings.manifest   format_version, dim, n, dtype, encoder, content_hash
//! <dir>/ppr-cache/            one file per (anchor, mask, config) global pool
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use crate::embedding::{EmbeddingError, EmbeddingTable, EncoderConfig};
use crate::graph::{AttributedGraph, GraphError, IngestReport};
use crate::ppr::{PprCache, PprError};

pub const GRAPH_FILE: &str = "graph.bin";
pub const REPORT_FILE: &str = "ingest-report.txt";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const EMBEDDINGS_MANIFEST: &str = "embeddings.manifest";
pub const PPR_CACHE_DIR: &str = "ppr-cache";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexDir {
    root: PathBuf,
}

impl IndexDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        IndexDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn graph_path(&self) -> PathBuf {
        self.root.join(GRAPH_FILE)
    }

    pub fn report_path(&self) -> PathBuf {
        self.root.join(REPORT_FILE)
    }

    pub fn ppr_cache_dir(&self) -> PathBuf {
        self.root.join(PPR_CACHE_DIR)
    }

    pub fn has_embeddings(&self) -> bool {
        self.root.join(EMBEDDINGS_FILE).is_file() && self.root.join(EMBEDDINGS_MANIFEST).is_file()
    }

    /// Loads the node and edge files and writes the graph and report.
    pub fn ingest(&self, nodes: &Path, edges: &Path) -> Result<(AttributedGraph, IngestReport), GraphError> {
        let (g, report) = AttributedGraph::load(nodes, edges)?;
        fs::create_dir_all(&self.root).map_err(|source| GraphError::Io {
            path: self.root.display().to_string(),
            source,
        })?;
        g.save(self.graph_path())?;
        let report_path = self.report_path();
        fs::write(&report_path, report.to_text()).map_err(|source| GraphError::Io {
            path: report_path.display().to_string(),
            source,
        })?;
        Ok((g, report))
    }

    pub fn graph(&self) -> Result<AttributedGraph, GraphError> {
        AttributedGraph::open(self.graph_path())
    }

    /// Computes corpus embeddings for the stored graph and writes them.
    pub fn build_embeddings(
        &self,
        g: &AttributedGraph,
        encoder: &EncoderConfig,
    ) -> Result<EmbeddingTable, EmbeddingError> {
        let table = encoder.corpus_embeddings(g)?;
        table.save(&self.root)?;
        Ok(table)
    }

    pub fn embeddings(&self) -> Result<EmbeddingTable, EmbeddingError> {
        EmbeddingTable::open(&self.root)
    }

    pub fn ppr_cache(&self) -> Result<PprCache, PprError> {
        PprCache::on_disk(self.ppr_cache_dir())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{G0_EDGES, G0_NODES};

    #[test]
    fn ingest_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = dir.path().join("n.tsv");
        let edges = dir.path().join("e.tsv");
        fs::write(&nodes, G0_NODES).unwrap();
        fs::write(&edges, G0_EDGES).unwrap();
        let idx = IndexDir::new(dir.path().join("idx"));
        let (g, report) = idx.ingest(&nodes, &edges).unwrap();
        assert_eq!(report.nodes, 6);
        assert_eq!(idx.graph().unwrap(), g);
        assert!(fs::read_to_string(idx.report_path()).unwrap().contains("nodes=6"));
        assert!(!idx.has_embeddings());
        let t = idx.build_embeddings(&g, &EncoderConfig::default()).unwrap();
        assert!(idx.has_embeddings());
        assert_eq!(idx.embeddings().unwrap(), t);
        idx.ppr_cache().unwrap();
        assert!(idx.ppr_cache_dir().is_dir());
    }
}
