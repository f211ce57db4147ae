//! Command-line driver: ingest, index, run, eval, bench.

pub mod config;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};

use graphsearch::bench::bench_retrieval;
use graphsearch::embedding::{EmbeddingError, EmbeddingTable};
use graphsearch::eval::{build_classification_instances, build_link_instances, run_eval, EvalError, InstanceSet};
use graphsearch::graph::{AttributedGraph, GraphError};
use graphsearch::index::IndexDir;
use graphsearch::ppr::{PprCache, PprError};
use graphsearch::query::{PromptContext, PromptTemplate, QueryError, SearchSpace, TaskKind};
use graphsearch::retriever::{Anchors, BaselineMode, RetrieveError, Retriever};
use graphsearch::rollout::{BackendError, Engine, ModelBackend, RemoteBackend, RolloutError, ScriptedBackend};
use graphsearch::synthetic::synthetic_graph;

use config::{help_of, BackendKind, Layer, RunConfig, KEYS};

/// A diagnostic carrying the module-level error kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        let message = message.into();
        // Module errors already lead with their kind.
        let message = message
            .strip_prefix(kind)
            .and_then(|m| m.strip_prefix(": "))
            .map(str::to_string)
            .unwrap_or(message);
        CliError { kind, message }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::new("ConfigInvalid", message)
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            "ConfigInvalid" | "UnknownCommand" => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.kind, self.message)
    }
}

macro_rules! from_module_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::new(e.kind(), e.to_string())
            }
        }
    )*};
}

from_module_error!(GraphError, EmbeddingError, PprError, QueryError, RetrieveError, RolloutError, EvalError, BackendError);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new("Io", e.to_string())
    }
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::new("Io", format!("{}: {e}", path.display()))
}

fn key_args(keys: &[&str]) -> Vec<Arg> {
    keys.iter()
        .map(|k| {
            Arg::new(k.to_string())
                .long(k.replace('_', "-"))
                .value_name("VALUE")
                .help(help_of(k))
        })
        .collect()
}

fn all_keys() -> Vec<&'static str> {
    KEYS.iter().map(|(k, _, _)| *k).collect()
}

fn config_arg() -> Arg {
    Arg::new("config")
        .long("config")
        .short('c')
        .value_name("FILE")
        .help("key = value config file; flags override it")
}

pub fn command() -> Command {
    let rollout_keys: Vec<&str> = all_keys();
    Command::new("graphsearch")
        .about("Graph-grounded agentic retrieval over text-attributed graphs")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(
            Command::new("ingest")
                .about("Build the graph from node and edge files and write an ingest report")
                .arg(config_arg())
                .args(key_args(&["nodes", "edges"]))
                .arg(
                    Arg::new("out")
                        .long("out")
                        .value_name("DIR")
                        .help("index directory to create (same as --index)"),
                )
                .args(key_args(&["index"])),
        )
        .subcommand(
            Command::new("index")
                .about("Compute corpus embeddings; optionally warm the PageRank cache")
                .arg(config_arg())
                .args(key_args(&[
                    "index",
                    "encoder",
                    "dim",
                    "vectors",
                    "damping",
                    "tolerance",
                    "max_iterations",
                    "global_pool",
                ]))
                .arg(
                    Arg::new("warm")
                        .long("warm")
                        .value_name("IDS")
                        .help("comma-separated anchor ids whose global pools are precomputed"),
                ),
        )
        .subcommand(
            Command::new("run")
                .about("Run one rollout for an anchor (or anchor pair) and print the trace")
                .arg(config_arg())
                .arg(
                    Arg::new("anchor")
                        .long("anchor")
                        .value_name("ID")
                        .required(true)
                        .help("anchor node id"),
                )
                .arg(
                    Arg::new("anchor_b")
                        .long("anchor-b")
                        .value_name("ID")
                        .help("second anchor; switches the task to link prediction"),
                )
                .arg(
                    Arg::new("json")
                        .long("json")
                        .action(ArgAction::SetTrue)
                        .help("print the trace as one JSON record"),
                )
                .arg(
                    Arg::new("retrieval_log")
                        .long("retrieval-log")
                        .value_name("FILE")
                        .help("append one JSON line per retrieval"),
                )
                .args(key_args(&rollout_keys)),
        )
        .subcommand(
            Command::new("eval")
                .about("Evaluate a batch of instances and write the report")
                .arg(config_arg())
                .arg(
                    Arg::new("out")
                        .long("out")
                        .value_name("DIR")
                        .help("directory for report.json and outcomes.csv"),
                )
                .arg(
                    Arg::new("sample_nodes")
                        .long("sample-nodes")
                        .value_name("N")
                        .help("sample N labeled nodes instead of reading --instances"),
                )
                .arg(
                    Arg::new("sample_links")
                        .long("sample-links")
                        .value_name("N")
                        .help("sample N edges and N non-edges instead of reading --instances"),
                )
                .args(key_args(&rollout_keys)),
        )
        .subcommand(
            Command::new("bench")
                .about("Compare per-retrieval latency of graph-aware and structure-agnostic retrieval")
                .arg(config_arg())
                .arg(
                    Arg::new("synthetic")
                        .long("synthetic")
                        .value_name("N")
                        .help("use a seeded synthetic graph with N nodes instead of --index"),
                )
                .arg(
                    Arg::new("avg_degree")
                        .long("avg-degree")
                        .value_name("D")
                        .default_value("20")
                        .help("average degree of the synthetic graph"),
                )
                .arg(
                    Arg::new("queries")
                        .long("queries")
                        .value_name("N")
                        .default_value("5000")
                        .help("queries issued to each mode"),
                )
                .arg(
                    Arg::new("space")
                        .long("space")
                        .value_name("SPACE")
                        .default_value("local1")
                        .help("graph-aware scope: local1, local2, global or attribute"),
                )
                .arg(
                    Arg::new("out")
                        .long("out")
                        .value_name("FILE")
                        .help("write the comparison as JSON"),
                )
                .args(key_args(&["index", "alpha", "k", "encoder", "dim", "vectors", "damping", "tolerance", "max_iterations", "global_pool", "attribute_pool", "seed"])),
        )
}

fn flag_layer(m: &ArgMatches) -> Layer {
    let mut layer = Layer::default();
    for (key, _, _) in KEYS {
        if let Ok(Some(v)) = m.try_get_one::<String>(key) {
            layer.set(key, v.clone());
        }
    }
    layer
}

fn load(m: &ArgMatches) -> Result<RunConfig, CliError> {
    let path = m.get_one::<String>("config").map(PathBuf::from);
    RunConfig::load(path.as_deref(), &flag_layer(m))
}

fn require<'a, T>(value: &'a Option<T>, key: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::config(format!("{key}: required for this command")))
}

fn index_dir(cfg: &RunConfig) -> Result<IndexDir, CliError> {
    Ok(IndexDir::new(require(&cfg.index, "index")?.clone()))
}

fn existing_index(cfg: &RunConfig) -> Result<IndexDir, CliError> {
    let idx = index_dir(cfg)?;
    if !idx.graph_path().is_file() {
        return Err(CliError::config(format!(
            "index: {} has no graph.bin; run ingest first",
            idx.root().display()
        )));
    }
    Ok(idx)
}

fn embeddings_for(idx: &IndexDir) -> Result<EmbeddingTable, CliError> {
    if !idx.has_embeddings() {
        return Err(CliError::config(format!(
            "index: {} has no embeddings; run index first",
            idx.root().display()
        )));
    }
    Ok(idx.embeddings()?)
}

fn backend(cfg: &RunConfig) -> Result<Box<dyn ModelBackend>, CliError> {
    match cfg.backend {
        BackendKind::Scripted => {
            let script = require(&cfg.script, "script")?;
            Ok(Box::new(ScriptedBackend::from_file(script)?))
        }
        BackendKind::Remote => {
            let remote = RemoteBackend::from_env()
                .map_err(|e| CliError::config(format!("backend: remote backend unavailable: {e}")))?;
            Ok(Box::new(remote))
        }
    }
}

fn prompt_context(cfg: &RunConfig) -> PromptContext {
    PromptContext::new(&cfg.dataset, &cfg.graph_kind, &cfg.node_noun, &cfg.domain)
}

fn rollout_config(cfg: &RunConfig) -> Result<graphsearch::rollout::RolloutConfig, CliError> {
    let mut r = cfg.rollout.clone();
    if let Some(t) = &cfg.template {
        r.template = Some(PromptTemplate::from_file(t)?);
    }
    Ok(r)
}

fn classes(cfg: &RunConfig, g: &AttributedGraph) -> Result<Vec<String>, CliError> {
    let classes = cfg.classes.clone().unwrap_or_else(|| g.labels());
    if classes.is_empty() {
        return Err(CliError::config("classes: the graph has no labels; set classes"));
    }
    Ok(classes)
}

fn resolve(g: &AttributedGraph, id: &str) -> Result<graphsearch::NodeId, CliError> {
    Ok(g.resolve(id)?)
}

fn cmd_ingest(m: &ArgMatches, out: &mut dyn Write) -> Result<(), CliError> {
    let path = m.get_one::<String>("config").map(PathBuf::from);
    let mut flags = flag_layer(m);
    if let Some(dir) = m.get_one::<String>("out") {
        flags.set("index", dir.clone());
    }
    let cfg = RunConfig::load(path.as_deref(), &flags)?;
    let nodes = require(&cfg.nodes, "nodes")?;
    let edges = require(&cfg.edges, "edges")?;
    let idx = index_dir(&cfg)?;
    let (_, report) = idx.ingest(nodes, edges)?;
    writeln!(out, "ingested N={} nodes, E={} edges into {}", report.nodes, report.edges, idx.root().display())?;
    write!(out, "{}", report.to_text())?;
    Ok(())
}

fn cmd_index(m: &ArgMatches, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load(m)?;
    let idx = existing_index(&cfg)?;
    let g = idx.graph()?;
    let table = idx.build_embeddings(&g, &cfg.encoder)?;
    writeln!(
        out,
        "embeddings: n={} dim={} encoder={} hash={}",
        table.len(),
        table.dim(),
        table.encoder(),
        table.content_hash()
    )?;
    if let Some(ids) = m.get_one::<String>("warm") {
        let cache = idx.ppr_cache()?;
        let mut ppr = cfg.ppr;
        ppr.pool_size = cfg.retriever.global_pool_size;
        let mut warmed = 0;
        for id in ids.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let a = resolve(&g, id)?;
            cache.global_pool(g.view(), a, &ppr)?;
            warmed += 1;
        }
        writeln!(out, "ppr cache: warmed {warmed} anchors in {}", idx.ppr_cache_dir().display())?;
    }
    Ok(())
}

fn cmd_run(m: &ArgMatches, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load(m)?;
    let idx = existing_index(&cfg)?;
    let g = idx.graph()?;
    let table = embeddings_for(&idx)?;
    let cache = idx.ppr_cache()?;
    let a = resolve(&g, m.get_one::<String>("anchor").expect("required"))?;
    let (anchors, task) = match m.get_one::<String>("anchor_b") {
        Some(b) => (Anchors::Pair(a, resolve(&g, b)?), TaskKind::LinkPrediction),
        None => (
            Anchors::Single(a),
            TaskKind::NodeClassification {
                classes: classes(&cfg, &g)?,
            },
        ),
    };
    let backend = backend(&cfg)?;
    let engine = Engine::new(
        &g,
        &table,
        &cfg.encoder,
        &cache,
        cfg.retriever.clone(),
        cfg.ppr,
        rollout_config(&cfg)?,
        prompt_context(&cfg),
    )?;
    let trace = engine.run_inference(&*backend, anchors, &task, None)?;
    if let Some(path) = m.get_one::<String>("retrieval_log") {
        let path = PathBuf::from(path);
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_at(&path))?;
        for rec in trace.retrieval_log(&g) {
            writeln!(f, "{}", rec.to_json_line()).map_err(io_at(&path))?;
        }
    }
    if m.get_flag("json") {
        writeln!(out, "{}", trace.to_record(true))?;
    } else {
        write!(out, "{}", trace.to_text(true))?;
    }
    Ok(())
}

fn parse_count(m: &ArgMatches, id: &str) -> Result<Option<usize>, CliError> {
    m.get_one::<String>(id)
        .map(|v| {
            v.parse()
                .map_err(|_| CliError::config(format!("{}: '{v}' is not a count", id.replace('_', "-"))))
        })
        .transpose()
}

fn cmd_eval(m: &ArgMatches, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load(m)?;
    let idx = existing_index(&cfg)?;
    let g = idx.graph()?;
    let table = embeddings_for(&idx)?;
    let cache = idx.ppr_cache()?;
    let sample_nodes = parse_count(m, "sample_nodes")?;
    let sample_links = parse_count(m, "sample_links")?;
    let (set, sampled) = match (&cfg.instances, sample_nodes, sample_links) {
        (Some(path), None, None) => (InstanceSet::load(path, &g, cfg.classes.clone())?, false),
        (None, Some(n), None) => (
            build_classification_instances(&g, n, Some(classes(&cfg, &g)?), cfg.seed),
            true,
        ),
        (None, None, Some(n)) => (build_link_instances(&g, n, n, cfg.seed)?, true),
        (None, None, None) => {
            return Err(CliError::config("instances: required (or use --sample-nodes / --sample-links)"))
        }
        _ => {
            return Err(CliError::config(
                "instances: give exactly one of --instances, --sample-nodes, --sample-links",
            ))
        }
    };
    let backend = backend(&cfg)?;
    let engine = Engine::new(
        &g,
        &table,
        &cfg.encoder,
        &cache,
        cfg.retriever.clone(),
        cfg.ppr,
        rollout_config(&cfg)?,
        prompt_context(&cfg),
    )?;
    let report = run_eval(&engine, &*backend, &set, cfg.in_flight)?;
    write!(out, "{}", report.summary())?;
    if let Some(dir) = m.get_one::<String>("out") {
        let dir = PathBuf::from(dir);
        fs::create_dir_all(&dir).map_err(io_at(&dir))?;
        let write = |name: &str, text: String| -> Result<(), CliError> {
            let p = dir.join(name);
            fs::write(&p, text).map_err(io_at(&p))
        };
        write("report.json", report.to_json(true))?;
        write("outcomes.csv", report.to_csv())?;
        if sampled {
            write("instances.tsv", set.to_tsv(&g))?;
        }
        writeln!(out, "wrote report to {}", dir.display())?;
    }
    Ok(())
}

fn parse_space(s: &str) -> Result<SearchSpace, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "local1" | "local" => Ok(SearchSpace::Local(1)),
        "local2" => Ok(SearchSpace::Local(2)),
        "global" => Ok(SearchSpace::Global),
        "attribute" => Ok(SearchSpace::Attribute),
        other => Err(CliError::config(format!("space: unknown scope '{other}'"))),
    }
}

fn cmd_bench(m: &ArgMatches, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load(m)?;
    let queries = parse_count(m, "queries")?.unwrap_or(5000);
    let space = parse_space(m.get_one::<String>("space").expect("has default"))?;
    let (g, table) = match parse_count(m, "synthetic")? {
        Some(n) => {
            if n < 2 {
                return Err(CliError::config("synthetic: need at least 2 nodes"));
            }
            let avg: f64 = m
                .get_one::<String>("avg_degree")
                .expect("has default")
                .parse()
                .map_err(|_| CliError::config("avg-degree: not a number"))?;
            let g = synthetic_graph(n, avg, cfg.seed);
            let table = cfg.encoder.corpus_embeddings(&g)?;
            (g, table)
        }
        None => {
            let idx = existing_index(&cfg)?;
            let g = idx.graph()?;
            let table = embeddings_for(&idx)?;
            (g, table)
        }
    };
    let cache = PprCache::in_memory();
    let retriever = Retriever::new(g.view(), &table, &cfg.encoder, cfg.retriever.clone(), cfg.ppr, &cache)?;
    let report = bench_retrieval(
        &retriever,
        queries,
        (BaselineMode::GraphAware, BaselineMode::StructureAgnostic),
        space,
        cfg.seed,
    )?;
    write!(out, "{}", report.summary())?;
    if let Some(p) = m.get_one::<String>("out") {
        let p = PathBuf::from(p);
        fs::write(&p, report.to_json()).map_err(io_at(&p))?;
    }
    Ok(())
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit status. Diagnostics go to `err`.
pub fn run(args: Vec<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
                ErrorKind::InvalidSubcommand => {
                    let e = CliError::new("UnknownCommand", first_line(&e.render().to_string()));
                    let _ = writeln!(err, "{e}");
                    e.exit_code()
                }
                _ => {
                    let e = CliError::config(first_line(&e.render().to_string()));
                    let _ = writeln!(err, "{e}");
                    e.exit_code()
                }
            };
        }
    };
    let result = match matches.subcommand() {
        Some(("ingest", m)) => cmd_ingest(m, out),
        Some(("index", m)) => cmd_index(m, out),
        Some(("run", m)) => cmd_run(m, out),
        Some(("eval", m)) => cmd_eval(m, out),
        Some(("bench", m)) => cmd_bench(m, out),
        _ => Err(CliError::new("UnknownCommand", "no subcommand given")),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}

fn first_line(s: &str) -> String {
    s.lines()
        .next()
        .unwrap_or("")
        .trim_start_matches("error: ")
        .to_string()
}
