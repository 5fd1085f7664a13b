//! Command-line surface. Exit codes: 0 success, 1 when any file failed,
//! 2 on usage or configuration errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;
use snipsym_core::agent::{AgentBackend, RuleBackend};
use snipsym_core::graph::{
    build_graph, errors_by_cwe, export_jsonld, import_jsonld, top_cves, EdgeKind, NodeKind, VulnGraph,
};
use snipsym_core::report::{
    classify_against_baseline, compute_metrics, emit_report, render_metrics, render_table, FileReport,
};

use crate::compile::load_templates;
use crate::config::{BackendKind, Mode, RunConfig};
use crate::ingest::load_corpus;
use crate::pipeline::{finish_run, load_results, replay_dir, to_json_text, FileOutcome, Pipeline};
use crate::remote::RemoteBackend;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FILE_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "snipsym",
    version,
    about = "Symbolic execution of incomplete Rust CVE snippets",
    arg_required_else_help = true
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Check wrappers without invoking a compiler.
    #[arg(long, global = true)]
    offline: bool,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,
    /// Output directory (for `graph` and `compare`, a file path is accepted).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the config value or the CPU count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Query {
    ErrorsByCwe,
    TopCves,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full pipeline over a directory of snippets.
    Analyze {
        corpus_dir: PathBuf,
        /// Recorded executor outputs, one `cwe-<n>-cve-<id>` directory per file.
        #[arg(long)]
        replay_root: Option<PathBuf>,
        /// Directory of wrapper templates overriding the bundled ones.
        #[arg(long)]
        templates: Option<PathBuf>,
    },
    /// Parse recorded executor output directories and report on them.
    Replay {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Build the JSON-LD graph from a run directory, report or records file.
    Graph { input: PathBuf },
    /// Answer a named query over a JSON-LD graph.
    Query {
        graph: PathBuf,
        #[arg(value_enum)]
        query: Query,
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Classify a report's files against baseline warning counts.
    Compare { report: PathBuf, baseline: PathBuf },
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn failed(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_FILE_FAILURE, message: message.into() }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            let code = e.exit_code();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(b) = cli.backend {
        config.backend = b;
    }
    if cli.offline {
        if config.backend == BackendKind::Remote {
            return Err(usage("--offline cannot be combined with the remote backend"));
        }
        config.toolchain.mode = Mode::Offline;
    }
    if let Some(w) = cli.workers {
        config.workers = Some(w);
    }
    Ok(config)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("snipsym-out"))
}

/// `--out` as a file when it has `ext`, otherwise `<dir>/<default_name>`.
fn out_file(cli: &Cli, ext: &str, default_name: &str) -> PathBuf {
    match &cli.out {
        Some(p) if p.extension().is_some_and(|e| e == ext) => p.clone(),
        Some(p) => p.join(default_name),
        None => PathBuf::from(default_name),
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| failed(format!("{}: {e}", dir.display())))
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| failed(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|e| failed(format!("{}: {e}", path.display())))
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Analyze { corpus_dir, replay_root, templates } => {
            analyze(cli, &config, corpus_dir, replay_root, templates, out)
        }
        Command::Replay { dirs } => replay(cli, &config, dirs, out),
        Command::Graph { input } => {
            let results = load_results(input).map_err(failed)?;
            let graph = build_graph(&results).map_err(|e| failed(e.to_string()))?;
            let path = out_file(cli, "jsonld", "graph.jsonld");
            write_file(&path, &to_json_text(&export_jsonld(&graph)))?;
            print_graph_summary(cli, &graph, out);
            Ok(EXIT_OK)
        }
        Command::Query { graph, query, n } => {
            let graph = import_jsonld(&read_json(graph)?).map_err(|e| failed(e.to_string()))?;
            query_graph(cli, &graph, *query, *n, out);
            Ok(EXIT_OK)
        }
        Command::Compare { report, baseline } => compare(cli, &config, report, baseline, out),
    }
}

fn analyze(
    cli: &Cli,
    config: &RunConfig,
    corpus: &Path,
    replay_root: &Option<PathBuf>,
    templates_dir: &Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let templates_dir = templates_dir.as_ref().or(config.templates_dir.as_ref());
    let templates = load_templates(templates_dir.map(PathBuf::as_path)).map_err(|e| usage(e.to_string()))?;
    let backend: Box<dyn AgentBackend + Sync> = match config.backend {
        BackendKind::Rule => Box::new(RuleBackend::new(templates.clone())),
        BackendKind::Remote => {
            Box::new(RemoteBackend::from_env(config.remote.clone()).map_err(|e| usage(e.to_string()))?)
        }
    };
    let loaded = load_corpus(corpus).map_err(|e| failed(e.to_string()))?;
    let mut code = EXIT_OK;
    let mut snippets = Vec::new();
    for item in loaded {
        match item {
            Ok(s) => snippets.push(s),
            Err(e) => {
                log::error!("{e}");
                code = EXIT_FILE_FAILURE;
            }
        }
    }
    if snippets.is_empty() {
        return Err(failed(format!("no loadable snippets in {}", corpus.display())));
    }
    let replay_root = replay_root
        .clone()
        .or_else(|| config.executor.replay_root.clone())
        .unwrap_or_else(|| corpus.join("klee_output"));
    let pipeline = Pipeline {
        backend: backend.as_ref(),
        templates: &templates,
        toolchain: &config.toolchain,
        executor: &config.executor,
        harness: &config.harness,
        replay_root: Some(replay_root),
    };
    let out_root = out_dir(cli);
    create_dir(&out_root)?;
    let workers = config.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let outcomes = pipeline.analyze(&snippets, &out_root, workers).map_err(|e| failed(e.to_string()))?;
    if outcomes.iter().any(|o| o.report.failed_stage.is_some()) {
        code = EXIT_FILE_FAILURE;
    }
    summarize(cli, config, &out_root, &outcomes, out)?;
    Ok(code)
}

fn replay(cli: &Cli, config: &RunConfig, dirs: &[PathBuf], out: &mut dyn Write) -> Result<i32, Failure> {
    let out_root = out_dir(cli);
    create_dir(&out_root)?;
    let mut code = EXIT_OK;
    let mut outcomes = Vec::new();
    for dir in dirs {
        match replay_dir(dir, &out_root) {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                log::error!("{}: {e}", dir.display());
                code = EXIT_FILE_FAILURE;
            }
        }
    }
    if outcomes.is_empty() {
        return Err(failed("no replay directory could be read"));
    }
    summarize(cli, config, &out_root, &outcomes, out)?;
    Ok(code)
}

fn summarize(
    cli: &Cli,
    config: &RunConfig,
    out_root: &Path,
    outcomes: &[FileOutcome],
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let summary = finish_run(out_root, outcomes, &config.confidence_weights).map_err(|e| failed(e.to_string()))?;
    let _ = match cli.format {
        Format::Json => write!(out, "{}", to_json_text(&summary.report)),
        Format::Text => {
            let failures: Vec<_> = outcomes
                .iter()
                .filter_map(|o| o.report.failed_stage.as_ref().map(|s| format!("{}: failed at {s}\n", o.report.cve_id)))
                .collect();
            writeln!(
                out,
                "{}{}wrote {}",
                render_metrics(&summary.metrics),
                failures.concat(),
                out_root.join("report.json").display()
            )
        }
    };
    Ok(())
}

fn print_graph_summary(cli: &Cli, g: &VulnGraph, out: &mut dyn Write) {
    let nodes: BTreeMap<&str, usize> = NodeKind::ALL.iter().map(|&k| (k.as_str(), g.node_count(k))).collect();
    let edges: BTreeMap<&str, usize> = EdgeKind::ALL.iter().map(|&k| (k.as_str(), g.edge_count(k))).collect();
    let _ = match cli.format {
        Format::Json => write!(out, "{}", to_json_text(&serde_json::json!({ "nodes": nodes, "edges": edges }))),
        Format::Text => {
            let mut rows = vec![vec!["element".to_string(), "count".to_string()]];
            rows.extend(nodes.iter().map(|(k, v)| vec![format!("{k} nodes"), v.to_string()]));
            rows.extend(edges.iter().map(|(k, v)| vec![format!("{k} edges"), v.to_string()]));
            write!(out, "{}", render_table(&rows))
        }
    };
}

fn query_graph(cli: &Cli, g: &VulnGraph, query: Query, n: usize, out: &mut dyn Write) {
    let _ = match (query, cli.format) {
        (Query::ErrorsByCwe, Format::Json) => write!(out, "{}", to_json_text(&errors_by_cwe(g))),
        (Query::TopCves, Format::Json) => write!(out, "{}", to_json_text(&top_cves(g, n))),
        (Query::ErrorsByCwe, Format::Text) => {
            let mut rows = vec![["cwe", "files", "detected", "rate", "errors"].map(String::from).to_vec()];
            for r in errors_by_cwe(g) {
                rows.push(vec![
                    format!("CWE-{}", r.cwe_id),
                    r.files.to_string(),
                    r.detected_files.to_string(),
                    r.detection_rate.percent(),
                    r.critical_errors.to_string(),
                ]);
            }
            write!(out, "{}", render_table(&rows))
        }
        (Query::TopCves, Format::Text) => {
            let mut rows = vec![["cve", "ptr", "external", "total"].map(String::from).to_vec()];
            for t in top_cves(g, n) {
                rows.push(vec![t.cve_id, t.ptr.to_string(), t.external.to_string(), t.total.to_string()]);
            }
            write!(out, "{}", render_table(&rows))
        }
    };
}

fn compare(cli: &Cli, config: &RunConfig, report: &Path, baseline: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let doc = read_json(report)?;
    let files: Vec<FileReport> = serde_json::from_value(doc.get("files").cloned().unwrap_or(Value::Null))
        .map_err(|e| failed(format!("{}: {e}", report.display())))?;
    let baseline: BTreeMap<String, u64> = serde_json::from_value(read_json(baseline)?)
        .map_err(|e| failed(format!("{}: expected {{\"<CVE-id>\": <count>}}: {e}", baseline.display())))?;
    let cmp = classify_against_baseline(&files, &baseline);
    for missing in &cmp.missing_baseline {
        log::warn!("{missing}: not in baseline, counted as 0 warnings");
    }
    let metrics = compute_metrics(&files).map_err(|e| failed(e.to_string()))?;
    let weights = match doc.get("confidence_weights") {
        Some(w) => serde_json::from_value(w.clone()).unwrap_or(config.confidence_weights),
        None => config.confidence_weights,
    };
    let merged = emit_report(&files, &metrics, Some(&cmp), &weights);
    if cli.out.is_some() {
        write_file(&out_file(cli, "json", "report.json"), &to_json_text(&merged))?;
    }
    let _ = match cli.format {
        Format::Json => write!(out, "{}", to_json_text(&cmp)),
        Format::Text => {
            let [a, b, c, d] = cmp.counts();
            let rows = vec![
                vec!["category".to_string(), "files".to_string()],
                vec!["only ours".into(), a.to_string()],
                vec!["only baseline".into(), b.to_string()],
                vec!["both".into(), c.to_string()],
                vec!["neither".into(), d.to_string()],
            ];
            write!(out, "{}", render_table(&rows))
        }
    };
    Ok(EXIT_OK)
}
