//! Flat `key = value` run configuration.
//!
//! Values come from three layers, later ones winning: built-in defaults, the
//! config file, command-line flags. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use graphsearch::embedding::EncoderConfig;
use graphsearch::ppr::PprConfig;
use graphsearch::query::Traversal;
use graphsearch::retriever::{BaselineMode, RetrieverConfig};
use graphsearch::rollout::{GenerationParams, RolloutConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Scripted,
    Remote,
}

/// Every recognised key with its default and help text. A default of ""
/// means unset.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("nodes", "", "nodes file: id<TAB>label<TAB>text per line"),
    ("edges", "", "edges file: id<TAB>id per line"),
    ("index", "", "index directory"),
    ("template", "", "prompt template file replacing the builtin one"),
    ("instances", "", "instances file for eval"),
    ("script", "", "scripted backend trace file"),
    ("classes", "", "class list separated by ';' (default: labels in the graph)"),
    ("dataset", "custom", "dataset name shown in prompts"),
    ("graph_kind", "text-attributed", "graph description shown in prompts"),
    ("node_noun", "node", "what one node is, shown in prompts"),
    ("domain", "Each node carries a text description and links to related nodes.", "domain knowledge sentence shown in prompts"),
    ("traversal", "F", "traversal policy: R or F"),
    ("mode", "graph_aware", "retrieval mode: graph_aware or structure_agnostic"),
    ("backend", "scripted", "model backend: scripted or remote"),
    ("alpha", "", "hybrid score weight in [0, 1] (default: 1 for R, 0.5 for F)"),
    ("k", "3", "nodes returned per search"),
    ("hop_max", "2", "largest local hop: 1 or 2"),
    ("global_pool", "50", "global (PageRank) pool size"),
    ("attribute_pool", "50", "attribute pool size"),
    ("r_hop_ceiling", "4", "largest ring served by the R traversal"),
    ("info_chars", "600", "characters of node text injected per result"),
    ("attribute_mode", "false", "advertise the attribute scope in F prompts"),
    ("damping", "0.85", "PageRank damping in (0, 1)"),
    ("tolerance", "1e-8", "PageRank L1 convergence tolerance"),
    ("max_iterations", "100", "PageRank iteration cap"),
    ("temperature", "0.7", "sampling temperature"),
    ("max_tokens", "8192", "total token budget per rollout"),
    ("max_search_steps", "8", "searches before the final-answer instruction"),
    ("in_flight", "4", "concurrent rollouts during eval"),
    ("seed", "0", "seed for all sampling"),
    ("encoder", "builtin", "embedding encoder: builtin or precomputed"),
    ("dim", "256", "builtin encoder dimension"),
    ("vectors", "", "precomputed vectors file"),
];

pub fn default_of(key: &str) -> &'static str {
    KEYS.iter()
        .find(|(k, _, _)| *k == key)
        .map(|(_, d, _)| *d)
        .unwrap_or("")
}

/// Help line for a flag, e.g. `nodes returned per search [default: 3]`.
pub fn help_of(key: &str) -> String {
    let (_, default, help) = KEYS
        .iter()
        .find(|(k, _, _)| *k == key)
        .copied()
        .unwrap_or((key, "", ""));
    if default.is_empty() {
        help.to_string()
    } else {
        format!("{help} [default: {default}]")
    }
}

/// Raw key-value layer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Layer(pub BTreeMap<String, String>);

impl Layer {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let Some((key, value)) = t.split_once('=') else {
                return Err(CliError::config(format!("line {}: expected 'key = value'", i + 1)));
            };
            let key = key.trim().to_ascii_lowercase().replace('-', "_");
            if !KEYS.iter().any(|(k, _, _)| *k == key) {
                return Err(CliError::config(format!("line {}: unknown key '{key}'", i + 1)));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(Layer(map))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("config: {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.0.insert(key.to_string(), value.into());
    }

    /// `other` wins on conflicts.
    pub fn overlay(mut self, other: &Layer) -> Layer {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
        self
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub template: Option<PathBuf>,
    pub instances: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub classes: Option<Vec<String>>,
    pub dataset: String,
    pub graph_kind: String,
    pub node_noun: String,
    pub domain: String,
    pub backend: BackendKind,
    pub retriever: RetrieverConfig,
    pub ppr: PprConfig,
    pub rollout: RolloutConfig,
    pub in_flight: usize,
    pub seed: u64,
    pub encoder: EncoderConfig,
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::config(format!("{key}: '{v}' is not a valid number")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::config(format!("{key}: '{v}' is not a boolean"))),
    }
}

impl RunConfig {
    /// Defaults only.
    pub fn defaults() -> Result<Self, CliError> {
        Self::from_layer(&Layer::default())
    }

    pub fn from_layer(layer: &Layer) -> Result<Self, CliError> {
        let get = |key: &str| -> Option<&str> {
            layer
                .0
                .get(key)
                .map(String::as_str)
                .or(Some(default_of(key)))
                .filter(|v| !v.is_empty())
        };
        let text = |key: &str| get(key).unwrap_or("").to_string();
        let num = |key: &str| -> Result<f64, CliError> {
            let v = get(key).unwrap_or("");
            let x: f64 = parse_num(key, v)?;
            if !x.is_finite() {
                return Err(CliError::config(format!("{key}: must be finite")));
            }
            Ok(x)
        };
        let int = |key: &str| -> Result<u64, CliError> { parse_num(key, get(key).unwrap_or("")) };
        let path = |key: &str| -> Result<Option<PathBuf>, CliError> { Ok(get(key).map(PathBuf::from)) };

        let traversal = Traversal::parse(get("traversal").unwrap_or(""))
            .ok_or_else(|| CliError::config(format!("traversal: expected R or F, got '{}'", text("traversal"))))?;
        let baseline = BaselineMode::parse(get("mode").unwrap_or(""))
            .ok_or_else(|| CliError::config(format!("mode: expected graph_aware or structure_agnostic, got '{}'", text("mode"))))?;
        let backend = match text("backend").to_ascii_lowercase().as_str() {
            "scripted" => BackendKind::Scripted,
            "remote" => BackendKind::Remote,
            other => return Err(CliError::config(format!("backend: expected scripted or remote, got '{other}'"))),
        };

        let mut retriever = RetrieverConfig::for_traversal(traversal);
        if get("alpha").is_some() {
            retriever.alpha = num("alpha")?;
        }
        if !(0.0..=1.0).contains(&retriever.alpha) {
            return Err(CliError::config(format!("alpha: must be in [0, 1], got {}", retriever.alpha)));
        }
        retriever.k = int("k")? as usize;
        if retriever.k < 1 {
            return Err(CliError::config("k: must be >= 1"));
        }
        let hop_max = int("hop_max")?;
        if !(1..=2).contains(&hop_max) {
            return Err(CliError::config(format!("hop_max: must be 1 or 2, got {hop_max}")));
        }
        retriever.hop_max = hop_max as u8;
        retriever.global_pool_size = int("global_pool")? as usize;
        if retriever.global_pool_size < 1 {
            return Err(CliError::config("global_pool: must be >= 1"));
        }
        retriever.attribute_pool_size = int("attribute_pool")? as usize;
        if retriever.attribute_pool_size < 1 {
            return Err(CliError::config("attribute_pool: must be >= 1"));
        }
        retriever.r_hop_ceiling = int("r_hop_ceiling")? as u32;
        if retriever.r_hop_ceiling < 1 {
            return Err(CliError::config("r_hop_ceiling: must be >= 1"));
        }
        retriever.info_char_budget = int("info_chars")? as usize;
        if retriever.info_char_budget < 1 {
            return Err(CliError::config("info_chars: must be >= 1"));
        }

        let ppr = PprConfig {
            damping: num("damping")?,
            tolerance: num("tolerance")?,
            max_iterations: int("max_iterations")? as usize,
            pool_size: retriever.global_pool_size,
        };
        if !(ppr.damping > 0.0 && ppr.damping < 1.0) {
            return Err(CliError::config(format!("damping: must be in (0, 1), got {}", ppr.damping)));
        }
        if ppr.tolerance <= 0.0 {
            return Err(CliError::config("tolerance: must be > 0"));
        }
        if ppr.max_iterations < 1 {
            return Err(CliError::config("max_iterations: must be >= 1"));
        }

        let params = GenerationParams {
            temperature: num("temperature")?,
            max_total_tokens: int("max_tokens")? as usize,
        };
        if params.temperature < 0.0 {
            return Err(CliError::config("temperature: must be >= 0"));
        }
        if params.max_total_tokens < 1 {
            return Err(CliError::config("max_tokens: must be >= 1"));
        }
        let mut rollout = RolloutConfig::new(traversal);
        rollout.baseline = baseline;
        rollout.params = params;
        rollout.max_search_steps = int("max_search_steps")? as usize;
        if rollout.max_search_steps < 1 {
            return Err(CliError::config("max_search_steps: must be >= 1"));
        }
        rollout.advertise_attribute = parse_bool("attribute_mode", get("attribute_mode").unwrap_or(""))?;

        let in_flight = int("in_flight")? as usize;
        if in_flight < 1 {
            return Err(CliError::config("in_flight: must be >= 1"));
        }

        let encoder = match text("encoder").to_ascii_lowercase().as_str() {
            "builtin" => {
                let dim = int("dim")? as usize;
                if dim < 1 {
                    return Err(CliError::config("dim: must be >= 1"));
                }
                EncoderConfig::BuiltinHashedBow { dim }
            }
            "precomputed" => EncoderConfig::Precomputed {
                vectors_path: path("vectors")?
                    .ok_or_else(|| CliError::config("vectors: required when encoder = precomputed"))?,
            },
            other => return Err(CliError::config(format!("encoder: expected builtin or precomputed, got '{other}'"))),
        };

        let classes = get("classes").map(|s| {
            s.split(';')
                .map(str::trim)
                .filter(|c| !c.is_empty())
                .map(String::from)
                .collect::<Vec<_>>()
        });
        if classes.as_ref().is_some_and(|c| c.is_empty()) {
            return Err(CliError::config("classes: list is empty"));
        }

        let cfg = RunConfig {
            nodes: path("nodes")?,
            edges: path("edges")?,
            index: path("index")?,
            template: path("template")?,
            instances: path("instances")?,
            script: path("script")?,
            classes,
            dataset: text("dataset"),
            graph_kind: text("graph_kind"),
            node_noun: text("node_noun"),
            domain: text("domain"),
            backend,
            retriever,
            ppr,
            rollout,
            in_flight,
            seed: int("seed")?,
            encoder,
        };
        cfg.check_paths()?;
        Ok(cfg)
    }

    /// Every input file named by the configuration must exist.
    fn check_paths(&self) -> Result<(), CliError> {
        let files = [
            ("nodes", &self.nodes),
            ("edges", &self.edges),
            ("template", &self.template),
            ("instances", &self.instances),
            ("script", &self.script),
        ];
        for (key, p) in files {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(CliError::config(format!("{key}: no such file: {}", p.display())));
                }
            }
        }
        if let EncoderConfig::Precomputed { vectors_path } = &self.encoder {
            if !vectors_path.is_file() {
                return Err(CliError::config(format!("vectors: no such file: {}", vectors_path.display())));
            }
        }
        Ok(())
    }

    pub fn load(path: Option<&Path>, flags: &Layer) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => Layer::load(p)?,
            None => Layer::default(),
        };
        Self::from_layer(&file.overlay(flags))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = RunConfig::from_layer(&Layer::parse("# nothing here\n\n").unwrap()).unwrap();
        assert_eq!(c.retriever.k, 3);
        assert_eq!(c.retriever.hop_max, 2);
        assert_eq!(c.retriever.alpha, 0.5);
        assert_eq!(c.rollout.params.temperature, 0.7);
        assert_eq!(c.rollout.params.max_total_tokens, 8192);
        assert_eq!(c.rollout.max_search_steps, 8);
        let r = RunConfig::from_layer(&Layer::parse("traversal = R").unwrap()).unwrap();
        assert_eq!(r.retriever.alpha, 1.0);
    }

    #[test]
    fn range_errors_name_the_field() {
        let err = RunConfig::from_layer(&Layer::parse("alpha=1.5").unwrap()).unwrap_err();
        assert_eq!(err.kind, "ConfigInvalid");
        assert!(err.message.starts_with("alpha"), "{}", err.message);
        for (line, key) in [("k = 0", "k"), ("hop_max = 3", "hop_max"), ("damping = 1", "damping"), ("traversal = X", "traversal")] {
            let err = RunConfig::from_layer(&Layer::parse(line).unwrap()).unwrap_err();
            assert!(err.message.starts_with(key), "{}", err.message);
        }
        assert!(Layer::parse("bogus = 1").is_err());
        assert!(Layer::parse("no equals sign").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = Layer::parse("alpha = 1").unwrap();
        let mut flags = Layer::default();
        flags.set("alpha", "0");
        let c = RunConfig::from_layer(&file.overlay(&flags)).unwrap();
        assert_eq!(c.retriever.alpha, 0.0);
    }

    #[test]
    fn missing_input_file() {
        let err = RunConfig::from_layer(&Layer::parse("instances = /no/such/missing.tsv").unwrap()).unwrap_err();
        assert_eq!(err.kind, "ConfigInvalid");
        assert!(err.message.contains("missing.tsv"));
    }
}
