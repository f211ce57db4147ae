//! Text encoder and cosine similarity.
//!
//! The builtin encoder is a hashed bag of words: every token is mapped to a
//! bucket by FNV-1a (64-bit) modulo `dim`, term frequencies are accumulated
//! and the result is L2-normalized. Precomputed vectors can be loaded instead.

use std::fs;
use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{AttributedGraph, NodeId};

pub const DEFAULT_DIM: usize = 256;
pub const EMBEDDING_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("EmptyText: text has no tokens after normalization")]
    EmptyText,
    #[error("DimensionMismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("ZeroVector: cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("MissingVector: no vector for node '{0}'")]
    MissingVector(String),
    #[error("MalformedVectors: line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("EncoderUnavailable: precomputed vectors cannot encode free text")]
    EncoderUnavailable,
    #[error("Io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl EmbeddingError {
    pub fn kind(&self) -> &'static str {
        match self {
            EmbeddingError::EmptyText => "EmptyText",
            EmbeddingError::DimensionMismatch { .. } => "DimensionMismatch",
            EmbeddingError::ZeroVector => "ZeroVector",
            EmbeddingError::MissingVector(_) => "MissingVector",
            EmbeddingError::Malformed { .. } => "MalformedVectors",
            EmbeddingError::EncoderUnavailable => "EncoderUnavailable",
            EmbeddingError::Io { .. } => "Io",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmbeddingError + '_ {
    move |source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Lowercased alphanumeric tokens; everything else separates tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Stable bucket for a token: FNV-1a over its UTF-8 bytes.
pub fn bucket(token: &str, dim: usize) -> usize {
    let mut h = FnvHasher::default();
    h.write(token.as_bytes());
    (h.finish() % dim as u64) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    values: Vec<f64>,
}

impl Vector {
    pub fn new(values: Vec<f64>) -> Self {
        Vector { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Vector::new(self.values.iter().map(|x| x * factor).collect())
    }
}

/// Four independent partial sums, combined pairwise. Fixed order, so
/// results are reproducible bit for bit.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    for (i, (x, y)) in ca.remainder().iter().zip(cb.remainder()).enumerate() {
        acc[i] += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine given precomputed norms, clamped to `[-1, 1]`.
#[inline]
pub(crate) fn cosine_with_norms(a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

pub fn cos_sim(a: &Vector, b: &Vector) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok(cosine_with_norms(&a.values, na, &b.values, nb))
}

#[derive(Debug, Clone, PartialEq)]
pub enum EncoderConfig {
    BuiltinHashedBow { dim: usize },
    Precomputed { vectors_path: std::path::PathBuf },
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig::BuiltinHashedBow { dim: DEFAULT_DIM }
    }
}

impl EncoderConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            EncoderConfig::BuiltinHashedBow { .. } => "builtin-hashed-bow",
            EncoderConfig::Precomputed { .. } => "precomputed",
        }
    }

    /// Encodes free text. Only the builtin encoder can do this.
    pub fn encode(&self, text: &str) -> Result<Vector, EmbeddingError> {
        match self {
            EncoderConfig::BuiltinHashedBow { dim } => encode_hashed(text, *dim),
            EncoderConfig::Precomputed { .. } => Err(EmbeddingError::EncoderUnavailable),
        }
    }

    pub fn corpus_embeddings(&self, g: &AttributedGraph) -> Result<EmbeddingTable, EmbeddingError> {
        match self {
            EncoderConfig::BuiltinHashedBow { dim } => {
                let rows: Result<Vec<Vector>, _> = g
                    .nodes()
                    .par_iter()
                    .map(|n| encode_hashed(&n.text, *dim))
                    .collect();
                EmbeddingTable::from_rows(*dim, rows?, self.kind_name())
            }
            EncoderConfig::Precomputed { vectors_path } => {
                let text = fs::read_to_string(vectors_path).map_err(io_err(vectors_path))?;
                EmbeddingTable::from_precomputed(&text, g)
            }
        }
    }
}

pub fn encode(cfg: &EncoderConfig, text: &str) -> Result<Vector, EmbeddingError> {
    cfg.encode(text)
}

fn encode_hashed(text: &str, dim: usize) -> Result<Vector, EmbeddingError> {
    let mut values = vec![0.0f64; dim];
    let mut any = false;
    for token in tokenize(text) {
        values[bucket(&token, dim)] += 1.0;
        any = true;
    }
    if !any {
        return Err(EmbeddingError::EmptyText);
    }
    let n = norm(&values);
    for v in &mut values {
        *v /= n;
    }
    Ok(Vector { values })
}

/// Row-major per-node vectors with cached norms.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f64>,
    norms: Vec<f64>,
    encoder: String,
}

impl EmbeddingTable {
    pub fn from_rows(dim: usize, rows: Vec<Vector>, encoder: &str) -> Result<Self, EmbeddingError> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        let mut norms = Vec::with_capacity(rows.len());
        for row in rows {
            if row.dim() != dim {
                return Err(EmbeddingError::DimensionMismatch {
                    left: dim,
                    right: row.dim(),
                });
            }
            let n = row.norm();
            if n == 0.0 {
                return Err(EmbeddingError::ZeroVector);
            }
            norms.push(n);
            data.extend_from_slice(&row.values);
        }
        Ok(EmbeddingTable {
            dim,
            data,
            norms,
            encoder: encoder.to_string(),
        })
    }

    /// Parses the `dim=<D>` header format and orders rows by node id.
    pub fn from_precomputed(text: &str, g: &AttributedGraph) -> Result<Self, EmbeddingError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let dim = match lines.next() {
            Some((_, header)) => header
                .trim()
                .strip_prefix("dim=")
                .and_then(|d| d.trim().parse::<usize>().ok())
                .filter(|&d| d > 0)
                .ok_or_else(|| EmbeddingError::Malformed {
                    line: 1,
                    reason: "expected header 'dim=<D>'".into(),
                })?,
            None => {
                return Err(EmbeddingError::Malformed {
                    line: 1,
                    reason: "empty vectors file".into(),
                })
            }
        };
        let mut rows: Vec<Option<Vector>> = vec![None; g.node_count()];
        for (i, line) in lines {
            let line_no = i + 1;
            let malformed = |reason: String| EmbeddingError::Malformed {
                line: line_no,
                reason,
            };
            let (ext, values) = line
                .split_once('\t')
                .ok_or_else(|| malformed("expected 'external_id<TAB>values'".into()))?;
            let values: Vec<f64> = values
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| malformed(e.to_string()))?;
            if values.len() != dim {
                return Err(malformed(format!("expected {dim} values, got {}", values.len())));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(malformed("non-finite value".into()));
            }
            // Vectors for unknown ids are ignored; the graph defines the corpus.
            if let Some(id) = g.lookup(ext.trim()) {
                rows[id.index()] = Some(Vector::new(values));
            }
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.ok_or_else(|| {
                    EmbeddingError::MissingVector(g.nodes()[i].external_id.clone())
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_rows(dim, rows, "precomputed")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn encoder(&self) -> &str {
        &self.encoder
    }

    #[inline]
    pub fn row(&self, v: NodeId) -> &[f64] {
        let start = v.index() * self.dim;
        &self.data[start..start + self.dim]
    }

    #[inline]
    pub fn row_norm(&self, v: NodeId) -> f64 {
        self.norms[v.index()]
    }

    pub fn vector(&self, v: NodeId) -> Result<Vector, EmbeddingError> {
        if v.index() >= self.len() {
            return Err(EmbeddingError::MissingVector(v.to_string()));
        }
        Ok(Vector::new(self.row(v).to_vec()))
    }

    /// Cosine between two stored rows.
    #[inline]
    pub fn cos_nodes(&self, a: NodeId, b: NodeId) -> f64 {
        cosine_with_norms(self.row(a), self.row_norm(a), self.row(b), self.row_norm(b))
    }

    /// Cosine between a stored row and an external vector of known norm.
    #[inline]
    pub fn cos_with(&self, a: NodeId, q: &[f64], q_norm: f64) -> f64 {
        cosine_with_norms(self.row(a), self.row_norm(a), q, q_norm)
    }

    fn matrix_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.matrix_bytes()))
    }

    pub fn manifest(&self) -> String {
        format!(
            "format_version={EMBEDDING_FORMAT_VERSION}\ndim={}\nn={}\ndtype=f64le\nencoder={}\ncontent_hash={}\n",
            self.dim,
            self.len(),
            self.encoder,
            self.content_hash()
        )
    }

    /// Writes `embeddings.bin` and `embeddings.manifest` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), EmbeddingError> {
        let bin = dir.join("embeddings.bin");
        let manifest = dir.join("embeddings.manifest");
        fs::write(&bin, self.matrix_bytes()).map_err(io_err(&bin))?;
        fs::write(&manifest, self.manifest()).map_err(io_err(&manifest))?;
        Ok(())
    }

    pub fn open(dir: &Path) -> Result<Self, EmbeddingError> {
        let bin = dir.join("embeddings.bin");
        let manifest_path = dir.join("embeddings.manifest");
        let manifest = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        let field = |key: &str| -> Result<String, EmbeddingError> {
            manifest
                .lines()
                .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .map(str::to_string)
                .ok_or_else(|| EmbeddingError::Malformed {
                    line: 0,
                    reason: format!("manifest lacks '{key}'"),
                })
        };
        let parse_usize = |key: &str| -> Result<usize, EmbeddingError> {
            field(key)?.parse().map_err(|_| EmbeddingError::Malformed {
                line: 0,
                reason: format!("manifest field '{key}' is not an integer"),
            })
        };
        let version = parse_usize("format_version")?;
        if version != EMBEDDING_FORMAT_VERSION as usize {
            return Err(EmbeddingError::Malformed {
                line: 0,
                reason: format!("unsupported embeddings format version {version}"),
            });
        }
        let dim = parse_usize("dim")?;
        let n = parse_usize("n")?;
        let encoder = field("encoder")?;
        let expected_hash = field("content_hash")?;
        let bytes = fs::read(&bin).map_err(io_err(&bin))?;
        if bytes.len() != dim * n * 8 {
            return Err(EmbeddingError::Malformed {
                line: 0,
                reason: format!("embeddings.bin has {} bytes, expected {}", bytes.len(), dim * n * 8),
            });
        }
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let norms = data.chunks_exact(dim).map(norm).collect();
        let table = EmbeddingTable {
            dim,
            data,
            norms,
            encoder,
        };
        if table.content_hash() != expected_hash {
            return Err(EmbeddingError::Malformed {
                line: 0,
                reason: "content hash mismatch".into(),
            });
        }
        Ok(table)
    }
}

pub fn corpus_embeddings(
    cfg: &EncoderConfig,
    g: &AttributedGraph,
) -> Result<EmbeddingTable, EmbeddingError> {
    cfg.corpus_embeddings(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::g0;

    fn builtin() -> EncoderConfig {
        EncoderConfig::default()
    }

    // Independent scalar oracle: token counts per bucket, then plain cosine.
    fn oracle_cos(a: &str, b: &str, dim: usize) -> f64 {
        let counts = |s: &str| {
            let mut v = vec![0.0f64; dim];
            for tok in s.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
                let mut h: u64 = 0xcbf29ce484222325;
                for byte in tok.to_lowercase().bytes() {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
                v[(h % dim as u64) as usize] += 1.0;
            }
            v
        };
        let (x, y) = (counts(a), counts(b));
        let mut d = 0.0;
        let mut nx = 0.0;
        let mut ny = 0.0;
        for i in 0..dim {
            d += x[i] * y[i];
            nx += x[i] * x[i];
            ny += y[i] * y[i];
        }
        d / (nx.sqrt() * ny.sqrt())
    }

    #[test]
    fn encode_is_deterministic() {
        let a = encode(&builtin(), "gibbs sampler").unwrap();
        let b = encode(&builtin(), "gibbs sampler").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), 256);
    }

    #[test]
    fn term_frequency_weighting() {
        let v = encode(&builtin(), "gibbs sampler gibbs").unwrap();
        let g = bucket("gibbs", 256);
        let s = bucket("sampler", 256);
        assert_ne!(g, s);
        assert!((v.values()[g] - 2.0 * v.values()[s]).abs() < 1e-12);
    }

    #[test]
    fn cosine_matches_scalar_oracle() {
        for (a, b) in [
            ("markov chain", "protein folding"),
            ("Markov chain sampling Gibbs sampler", "Outperforming the Gibbs sampler"),
            ("deep learning", "learning deep deep structures"),
        ] {
            let va = encode(&builtin(), a).unwrap();
            let vb = encode(&builtin(), b).unwrap();
            let got = cos_sim(&va, &vb).unwrap();
            assert!((got - oracle_cos(a, b, 256)).abs() < 1e-12, "{a} / {b}");
        }
    }

    #[test]
    fn empty_text_rejected() {
        assert!(matches!(encode(&builtin(), " ,.;  "), Err(EmbeddingError::EmptyText)));
    }

    #[test]
    fn cos_sim_cases() {
        let x = Vector::new(vec![0.3, -1.2, 4.0]);
        assert!((cos_sim(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let e1 = Vector::new(vec![1.0, 0.0]);
        let e2 = Vector::new(vec![0.0, 1.0]);
        assert_eq!(cos_sim(&e1, &e2).unwrap(), 0.0);
        let d = Vector::new(vec![1.0, 1.0]);
        assert!((cos_sim(&d, &e1).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(matches!(
            cos_sim(&e1, &Vector::new(vec![1.0])),
            Err(EmbeddingError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            cos_sim(&e1, &Vector::new(vec![0.0, 0.0])),
            Err(EmbeddingError::ZeroVector)
        ));
    }

    #[test]
    fn corpus_rows_are_unit_norm() {
        let g = g0();
        let table = corpus_embeddings(&builtin(), &g).unwrap();
        assert_eq!(table.len(), 6);
        for i in 0..6 {
            assert!((table.row_norm(NodeId(i)) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn persisted_table_round_trips() {
        let g = g0();
        let dir = tempfile::tempdir().unwrap();
        let table = corpus_embeddings(&builtin(), &g).unwrap();
        table.save(dir.path()).unwrap();
        let first = fs::read(dir.path().join("embeddings.bin")).unwrap();
        let reloaded = EmbeddingTable::open(dir.path()).unwrap();
        assert_eq!(reloaded, table);
        corpus_embeddings(&builtin(), &g).unwrap().save(dir.path()).unwrap();
        assert_eq!(fs::read(dir.path().join("embeddings.bin")).unwrap(), first);
    }

    #[test]
    fn precomputed_missing_node() {
        let g = g0();
        let mut text = String::from("dim=2\n");
        for ext in ["p0", "p1", "p2", "p3", "p4"] {
            text.push_str(&format!("{ext}\t0.5,1.0\n"));
        }
        match EmbeddingTable::from_precomputed(&text, &g) {
            Err(EmbeddingError::MissingVector(id)) => assert_eq!(id, "p5"),
            other => panic!("{other:?}"),
        }
        text.push_str("p5\t1,0\n");
        let table = EmbeddingTable::from_precomputed(&text, &g).unwrap();
        assert_eq!(table.dim(), 2);
        assert_eq!(table.row(NodeId(5)), &[1.0, 0.0]);
    }
}
