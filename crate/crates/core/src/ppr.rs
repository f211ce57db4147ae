//! Personalized PageRank from a single anchor, and the on-disk top-M cache.

use std::collections::HashMap;
use std::fs;
use std::hash::Hasher;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use fnv::FnvHasher;
use thiserror::Error;

use crate::graph::{GraphError, GraphView, NodeId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PprConfig {
    pub damping: f64,
    /// L1 residual between successive iterates.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub pool_size: usize,
}

impl Default for PprConfig {
    fn default() -> Self {
        PprConfig {
            damping: 0.85,
            tolerance: 1e-8,
            max_iterations: 100,
            pool_size: 50,
        }
    }
}

#[derive(Debug, Error)]
pub enum PprError {
    #[error("UnknownNode: {0}")]
    UnknownNode(String),
    #[error("ConfigInvalid: {0}")]
    ConfigInvalid(String),
    #[error("PprCache: {0}")]
    Cache(String),
}

impl PprError {
    pub fn kind(&self) -> &'static str {
        match self {
            PprError::UnknownNode(_) => "UnknownNode",
            PprError::ConfigInvalid(_) => "ConfigInvalid",
            PprError::Cache(_) => "PprCache",
        }
    }
}

impl From<GraphError> for PprError {
    fn from(e: GraphError) -> Self {
        PprError::UnknownNode(e.to_string())
    }
}

impl PprConfig {
    pub fn validate(&self) -> Result<(), PprError> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(PprError::ConfigInvalid(format!(
                "damping must be in (0, 1), got {}",
                self.damping
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(PprError::ConfigInvalid("tolerance must be > 0".into()));
        }
        if self.pool_size < 1 {
            return Err(PprError::ConfigInvalid("pool size must be >= 1".into()));
        }
        Ok(())
    }

    /// Stable hex digest of the parameters, used as part of cache keys.
    pub fn digest(&self) -> String {
        let mut h = FnvHasher::default();
        h.write(
            format!(
                "{:?}|{:?}|{}|{}",
                self.damping, self.tolerance, self.max_iterations, self.pool_size
            )
            .as_bytes(),
        );
        format!("{:016x}", h.finish())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PprScores {
    pub scores: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

impl PprScores {
    pub fn score(&self, v: NodeId) -> f64 {
        self.scores[v.index()]
    }
}

/// Power iteration of `p <- (1-d) e_anchor + d W^T p`, with dangling mass
/// returned to the anchor.
pub fn personalized_pagerank(
    view: GraphView<'_>,
    anchor: NodeId,
    cfg: &PprConfig,
) -> Result<PprScores, PprError> {
    cfg.validate()?;
    view.graph().check(anchor)?;
    let n = view.node_count();
    let a = anchor.index();
    let degrees: Vec<usize> = (0..n).map(|u| view.degree(NodeId(u as u32))).collect();

    let mut p = vec![0.0f64; n];
    p[a] = 1.0;
    let mut next = vec![0.0f64; n];
    let d = cfg.damping;
    let mut iterations_used = 0;
    let mut converged = false;

    while iterations_used < cfg.max_iterations {
        iterations_used += 1;
        next.iter_mut().for_each(|x| *x = 0.0);
        let mut dangling = 0.0;
        for u in 0..n {
            let mass = p[u];
            if mass == 0.0 {
                continue;
            }
            if degrees[u] == 0 {
                dangling += mass;
                continue;
            }
            let share = d * mass / degrees[u] as f64;
            for v in view.neighbors(NodeId(u as u32)) {
                next[v.index()] += share;
            }
        }
        next[a] += (1.0 - d) + d * dangling;
        let residual: f64 = p.iter().zip(&next).map(|(x, y)| (x - y).abs()).sum();
        std::mem::swap(&mut p, &mut next);
        if residual < cfg.tolerance {
            converged = true;
            break;
        }
    }

    Ok(PprScores {
        scores: p,
        iterations_used,
        converged,
    })
}

/// Top-`m` nodes by score, anchor excluded, ties by ascending id. Nodes with
/// zero score are unreachable and never included.
pub fn global_neighbor_set(scores: &PprScores, anchor: NodeId, m: usize) -> Vec<NodeId> {
    ranked_pool(scores, anchor, m)
        .into_iter()
        .map(|(v, _)| v)
        .collect()
}

fn ranked_pool(scores: &PprScores, anchor: NodeId, m: usize) -> Vec<(NodeId, f64)> {
    let mut ranked: Vec<(NodeId, f64)> = scores
        .scores
        .iter()
        .enumerate()
        .filter(|&(v, &s)| v != anchor.index() && s > 0.0)
        .map(|(v, &s)| (NodeId(v as u32), s))
        .collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    ranked.truncate(m);
    ranked
}

/// Lazily computed global pools keyed by (anchor, mask, config digest).
///
/// Entries live in memory and, when a directory is configured, as text files
/// written via temp-file-then-rename so concurrent rollouts can share them.
#[derive(Debug, Default)]
pub struct PprCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, Vec<(NodeId, f64)>>>,
}

impl PprCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self, PprError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| PprError::Cache(format!("{}: {e}", dir.display())))?;
        Ok(PprCache {
            dir: Some(dir),
            memory: Mutex::new(HashMap::new()),
        })
    }

    fn key(view: &GraphView<'_>, anchor: NodeId, cfg: &PprConfig) -> String {
        let g = view.graph();
        let ext = &g.nodes()[anchor.index()].external_id;
        let mut h = FnvHasher::default();
        h.write(ext.as_bytes());
        if let Some((u, v)) = view.mask() {
            h.write(b"|mask|");
            h.write(g.nodes()[u.index()].external_id.as_bytes());
            h.write(b"|");
            h.write(g.nodes()[v.index()].external_id.as_bytes());
        }
        format!("{:016x}-{}", h.finish(), cfg.digest())
    }

    /// The anchor's global pool as `(node, score)` in rank order.
    pub fn global_pool(
        &self,
        view: GraphView<'_>,
        anchor: NodeId,
        cfg: &PprConfig,
    ) -> Result<Vec<(NodeId, f64)>, PprError> {
        view.graph().check(anchor)?;
        let key = Self::key(&view, anchor, cfg);
        if let Some(hit) = self.memory.lock().expect("ppr cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        if let Some(entry) = self.read_entry(&view, &key, anchor, cfg)? {
            self.memory
                .lock()
                .expect("ppr cache poisoned")
                .insert(key, entry.clone());
            return Ok(entry);
        }
        let scores = personalized_pagerank(view, anchor, cfg)?;
        if !scores.converged {
            log::info!(
                "personalized PageRank for anchor {} stopped after {} iterations without converging",
                anchor,
                scores.iterations_used
            );
        }
        let pool = ranked_pool(&scores, anchor, cfg.pool_size);
        self.write_entry(&view, &key, anchor, cfg, &pool)?;
        self.memory
            .lock()
            .expect("ppr cache poisoned")
            .insert(key, pool.clone());
        Ok(pool)
    }

    fn entry_path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.txt")))
    }

    fn read_entry(
        &self,
        view: &GraphView<'_>,
        key: &str,
        anchor: NodeId,
        cfg: &PprConfig,
    ) -> Result<Option<Vec<(NodeId, f64)>>, PprError> {
        let Some(path) = self.entry_path(key) else {
            return Ok(None);
        };
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(PprError::Cache(format!("{}: {e}", path.display()))),
        };
        let g = view.graph();
        let bad = |why: &str| PprError::Cache(format!("{}: {why}", path.display()));
        let mut lines = text.lines();
        let expected_anchor = format!("anchor={}", g.nodes()[anchor.index()].external_id);
        let expected_cfg = format!("config={}", cfg.digest());
        if lines.next() != Some("format_version=1")
            || lines.next() != Some(expected_anchor.as_str())
            || lines.next() != Some(expected_cfg.as_str())
        {
            return Err(bad("manifest does not match request"));
        }
        let mut pool = Vec::new();
        for line in lines {
            let (ext, score) = line.split_once('\t').ok_or_else(|| bad("bad entry line"))?;
            let v = g.lookup(ext).ok_or_else(|| bad("unknown node in entry"))?;
            let s: f64 = score.parse().map_err(|_| bad("bad score"))?;
            pool.push((v, s));
        }
        Ok(Some(pool))
    }

    fn write_entry(
        &self,
        view: &GraphView<'_>,
        key: &str,
        anchor: NodeId,
        cfg: &PprConfig,
        pool: &[(NodeId, f64)],
    ) -> Result<(), PprError> {
        let Some(path) = self.entry_path(key) else {
            return Ok(());
        };
        let g = view.graph();
        let mut text = format!(
            "format_version=1\nanchor={}\nconfig={}\n",
            g.nodes()[anchor.index()].external_id,
            cfg.digest()
        );
        for (v, s) in pool {
            // `{:?}` is the shortest representation that parses back exactly.
            text.push_str(&format!("{}\t{:?}\n", g.nodes()[v.index()].external_id, s));
        }
        let tmp = tmp_path(&path);
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| PprError::Cache(format!("{}: {e}", path.display())))
    }

    pub fn directory(&self) -> Option<&Path> {
        self.dir.as_deref()
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let unique = format!(
        "{}.{}.{:?}.tmp",
        path.display(),
        std::process::id(),
        std::thread::current().id()
    );
    PathBuf::from(unique)
}
