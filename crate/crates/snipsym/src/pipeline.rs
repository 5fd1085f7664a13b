//! Per-file orchestration and corpus runs.
//!
//! Each file gets `<out>/cwe-<n>-cve-<id>/` holding `plan.json`, `risk.json`,
//! `wrapper.rs`, `harness.c`, `params.json`, `records.json` and
//! `report.json`. Stage failures are recorded in the file's report; they
//! never stop the corpus.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use snipsym_core::agent::{assess_safety, generate_wrapper, plan_analysis, select_params, AgentBackend};
use snipsym_core::errfile::{summarize_criticality, ConfidenceWeights};
use snipsym_core::graph::{build_graph, export_jsonld, FileResult, GraphError, VulnGraph};
use snipsym_core::harness::{generate_harness, HarnessSpec};
use snipsym_core::report::{compute_metrics, emit_report, CompileOrigin, FileReport, MetricsError, RunMetrics};
use snipsym_core::snippet::{CveSnippet, Identity};
use snipsym_core::wrapper::{CompileOutcome, TemplateLibrary, WrapperOrigin};

use crate::compile::{compile_wrapper, ToolchainError};
use crate::config::{ExecutorConfig, ExecutorMode, HarnessDefaults, ToolchainConfig};
use crate::process;
use crate::session::{self, ExecutorSession};

pub const ARTIFACTS: [&str; 5] = ["plan.json", "risk.json", "wrapper.rs", "harness.c", "params.json"];

/// Pretty JSON with a trailing newline.
pub fn to_json_text<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values serialize");
    s.push('\n');
    s
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|source| RunError::Io { path: path.into(), source })
}

/// What one file produced.
#[derive(Debug, Clone)]
pub struct FileOutcome {
    pub report: FileReport,
    /// Parsed records; absent when the file failed before execution.
    pub result: Option<FileResult>,
    pub elapsed: Duration,
}

pub struct Pipeline<'a> {
    pub backend: &'a (dyn AgentBackend + Sync),
    pub templates: &'a TemplateLibrary,
    pub toolchain: &'a ToolchainConfig,
    pub executor: &'a ExecutorConfig,
    pub harness: &'a HarnessDefaults,
    /// Recorded output directories, one per file, for replay sessions.
    pub replay_root: Option<PathBuf>,
}

struct FileRun {
    report: FileReport,
    dir: PathBuf,
    rel: String,
}

impl FileRun {
    fn persist(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        write(&self.dir.join(name), contents)?;
        self.report.artifact_paths.insert(name.to_string(), format!("{}/{name}", self.rel));
        Ok(())
    }

    fn fail(&mut self, stage: &str, message: impl std::fmt::Display) {
        log::warn!("{}: {stage} failed: {message}", self.report.cve_id);
        self.report.failed_stage = Some(stage.to_string());
        self.report.warnings.push(format!("{stage}: {message}"));
    }
}

impl Pipeline<'_> {
    fn session_for(&self, identity: &Identity, dir: &Path) -> ExecutorSession {
        match self.executor.mode {
            ExecutorMode::Replay => {
                let root = self.replay_root.clone().unwrap_or_else(|| PathBuf::from("klee_output"));
                ExecutorSession::Replay { dir: root.join(identity.dir_name()) }
            }
            ExecutorMode::Live => ExecutorSession::live(self.executor, dir.join("klee-out")),
        }
    }

    pub fn run_pipeline(&self, snippet: &CveSnippet, out_root: &Path) -> Result<FileOutcome, RunError> {
        let started = Instant::now();
        let identity = snippet.identity();
        let rel = identity.dir_name();
        let dir = out_root.join(&rel);
        fs::create_dir_all(&dir).map_err(|source| RunError::Io { path: dir.clone(), source })?;
        let mut run =
            FileRun { report: FileReport::new(snippet.cve_id.as_str(), snippet.cwe_id, Default::default()), dir, rel };
        let result = self.stages(snippet, &mut run)?;
        run.report.detected = run.report.summary.detected();
        run.persist("report.json", &to_json_text(&run.report))?;
        let elapsed = started.elapsed();
        log::info!("{}: finished in {:.2} s", run.report.cve_id, elapsed.as_secs_f64());
        Ok(FileOutcome { report: run.report, result, elapsed })
    }

    fn stages(&self, snippet: &CveSnippet, run: &mut FileRun) -> Result<Option<FileResult>, RunError> {
        let backend: &dyn AgentBackend = self.backend;
        let plan = match plan_analysis(snippet, backend) {
            Ok(p) => p,
            Err(e) => {
                run.fail("oracle", e);
                return Ok(None);
            }
        };
        run.report.warnings.extend(plan.warnings);
        let plan = plan.value;
        run.persist("plan.json", &to_json_text(&plan))?;

        let risk = match assess_safety(snippet, &plan, backend) {
            Ok(r) => r,
            Err(e) => {
                run.fail("safety", e);
                return Ok(None);
            }
        };
        run.report.warnings.extend(risk.warnings);
        let risk = risk.value;
        run.report.risk_score = Some(risk.risk_score);
        run.persist("risk.json", &to_json_text(&risk))?;

        let build_dir = run.dir.join("build");
        let mut toolchain_error: Option<ToolchainError> = None;
        let mut compile = |artifact: &_| match compile_wrapper(artifact, self.toolchain, &build_dir) {
            Ok(outcome) => outcome,
            Err(e) => {
                let diagnostic = e.to_string();
                toolchain_error.get_or_insert(e);
                CompileOutcome::Failure { diagnostic }
            }
        };
        let wrapper = match generate_wrapper(snippet, &plan, &risk, backend, self.templates, &mut compile) {
            Ok(w) => w,
            Err(e) => {
                run.fail("codegen", e);
                return Ok(None);
            }
        };
        run.report.warnings.extend(wrapper.warnings);
        run.report.attempts_used = wrapper.artifact.attempts_used;
        run.report.compile_origin = Some(match (&wrapper.compile, wrapper.artifact.origin) {
            (CompileOutcome::Failure { .. }, _) => CompileOrigin::Failed,
            (_, WrapperOrigin::Generated) => CompileOrigin::Generated,
            (_, WrapperOrigin::Fallback) => CompileOrigin::Fallback,
        });
        run.persist("wrapper.rs", &wrapper.artifact.source_text)?;

        let spec = HarnessSpec {
            signatures: wrapper.artifact.exported_functions.clone(),
            buffer_bytes: self.harness.buffer_bytes,
            index_bound: self.harness.index_bound,
        };
        let harness = match generate_harness(&spec) {
            Ok(h) => h,
            Err(e) => {
                run.fail("harness", e);
                return Ok(None);
            }
        };
        run.persist("harness.c", &harness.text)?;

        let params = select_params(&risk, &plan, backend);
        run.report.warnings.extend(params.warnings);
        let params = params.value;
        run.report.params = Some(params.clone());
        run.persist("params.json", &to_json_text(&params))?;

        if let CompileOutcome::Failure { diagnostic } = &wrapper.compile {
            let message = toolchain_error.map_or_else(|| diagnostic.clone(), |e| e.to_string());
            run.fail("compile", message);
            return Ok(None);
        }

        let session = self.session_for(&snippet.identity(), &run.dir);
        let bitcode = match (&session, &wrapper.compile) {
            (ExecutorSession::Live { .. }, CompileOutcome::Success { bitcode_path: Some(bc) }) => {
                match self.link(&run.dir.join("harness.c"), Path::new(bc), &build_dir.join("linked.bc")) {
                    Ok(p) => Some(p),
                    Err(e) => {
                        run.fail("executor", e);
                        return Ok(None);
                    }
                }
            }
            _ => None,
        };
        let listing = match session::run(&session, bitcode.as_deref(), &params) {
            Ok(l) => l,
            Err(e) => {
                run.fail("executor", e);
                return Ok(None);
            }
        };
        if listing.partial {
            run.report.warnings.push("executor: timed out, results are partial".into());
        }
        for q in &listing.quarantined {
            run.report.warnings.push(format!("executor: unrecognized error file {}", file_name(q)));
        }
        let parsed = session::parse_listing(&listing);
        for e in &parsed.malformed {
            run.report.warnings.push(format!("parser: {e}"));
        }
        run.report.warnings.extend(parsed.unreadable.iter().map(|u| format!("parser: {u}")));
        run.report.summary = summarize_criticality(&parsed.records);
        let result = FileResult::from_snippet(snippet, parsed.records);
        run.persist("records.json", &to_json_text(&result))?;
        Ok(Some(result))
    }

    fn link(&self, harness: &Path, wrapper_bc: &Path, output: &Path) -> Result<PathBuf, String> {
        let argv = process::expand(
            &self.executor.link_command,
            &[
                ("harness", &harness.to_string_lossy()),
                ("wrapper", &wrapper_bc.to_string_lossy()),
                ("output", &output.to_string_lossy()),
            ],
            &[],
        );
        let done = process::run(&argv, Duration::from_secs(300)).map_err(|e| format!("link: {e}"))?;
        if done.status.is_some_and(|s| s.success()) && output.is_file() {
            Ok(output.to_path_buf())
        } else {
            Err(format!("link failed: {}", done.stderr.trim()))
        }
    }

    /// Runs every snippet on a pool of `workers` threads (one when the
    /// backend is serial-only). Output order follows input order.
    pub fn analyze(
        &self,
        snippets: &[CveSnippet],
        out_root: &Path,
        workers: usize,
    ) -> Result<Vec<FileOutcome>, RunError> {
        let workers = if self.backend.serial_only() { 1 } else { workers.max(1) };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
        pool.install(|| snippets.par_iter().map(|s| self.run_pipeline(s, out_root)).collect())
    }
}

fn file_name(path: &str) -> &str {
    Path::new(path).file_name().and_then(|n| n.to_str()).unwrap_or(path)
}

/// Identity of a recorded output directory: a `<dir>.meta.json` sidecar or
/// the directory name.
pub fn replay_identity(dir: &Path) -> Result<Identity, String> {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let sidecar = dir.with_file_name(format!("{name}.meta.json"));
    if sidecar.is_file() {
        let text = fs::read_to_string(&sidecar).map_err(|e| format!("{}: {e}", sidecar.display()))?;
        return Identity::from_sidecar(&text).map_err(|e| format!("{}: {e}", sidecar.display()));
    }
    Identity::from_name(&name).map_err(|e| e.to_string())
}

/// Parses a recorded output directory without running any agent stage.
pub fn replay_dir(dir: &Path, out_root: &Path) -> Result<FileOutcome, String> {
    let started = Instant::now();
    let identity = replay_identity(dir)?;
    let listing = session::scan_dir(dir).map_err(|e| e.to_string())?;
    let parsed = session::parse_listing(&listing);
    let mut report = FileReport::new(identity.cve_id.as_str(), identity.cwe_id, summarize_criticality(&parsed.records));
    report
        .warnings
        .extend(listing.quarantined.iter().map(|q| format!("executor: unrecognized error file {}", file_name(q))));
    report.warnings.extend(parsed.malformed.iter().map(|e| format!("parser: {e}")));
    report.warnings.extend(parsed.unreadable.iter().map(|u| format!("parser: {u}")));
    let result =
        FileResult { identity: identity.clone(), origin: dir.to_string_lossy().into_owned(), records: parsed.records };
    let rel = identity.dir_name();
    let out_dir = out_root.join(&rel);
    fs::create_dir_all(&out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
    for name in ["records.json", "report.json"] {
        report.artifact_paths.insert(name.into(), format!("{rel}/{name}"));
    }
    fs::write(out_dir.join("records.json"), to_json_text(&result)).map_err(|e| e.to_string())?;
    fs::write(out_dir.join("report.json"), to_json_text(&report)).map_err(|e| e.to_string())?;
    Ok(FileOutcome { report, result: Some(result), elapsed: started.elapsed() })
}

/// Corpus-level results written next to the per-file directories.
#[derive(Debug)]
pub struct RunSummary {
    pub metrics: RunMetrics,
    pub report: Value,
    pub graph: VulnGraph,
}

/// Writes `<out>/report.json` and `<out>/graph.jsonld`.
pub fn finish_run(
    out_root: &Path,
    outcomes: &[FileOutcome],
    weights: &ConfidenceWeights,
) -> Result<RunSummary, RunError> {
    let reports: Vec<FileReport> = outcomes.iter().map(|o| o.report.clone()).collect();
    let metrics = compute_metrics(&reports)?;
    let report = emit_report(&reports, &metrics, None, weights);
    let results: Vec<FileResult> = outcomes.iter().filter_map(|o| o.result.clone()).collect();
    let graph = build_graph(&results)?;
    write(&out_root.join("report.json"), &to_json_text(&report))?;
    write(&out_root.join("graph.jsonld"), &to_json_text(&export_jsonld(&graph)))?;
    let total: Duration = outcomes.iter().map(|o| o.elapsed).sum();
    log::info!("{} files, {:.2} s of file time", outcomes.len(), total.as_secs_f64());
    Ok(RunSummary { metrics, report, graph })
}

/// Collects `FileResult`s from a run directory, a `report.json` inside one,
/// a `records.json`, or a JSON array of file results.
pub fn load_results(path: &Path) -> Result<Vec<FileResult>, String> {
    let root = if path.is_dir() {
        Some(path.to_path_buf())
    } else if path.file_name().is_some_and(|n| n == "report.json") {
        path.parent().map(Path::to_path_buf)
    } else {
        None
    };
    let read = |p: &Path| -> Result<Value, String> {
        let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))
    };
    let decode = |p: &Path, v: Value| -> Result<Vec<FileResult>, String> {
        let items = match v {
            Value::Array(items) => items,
            other => vec![other],
        };
        items.into_iter().map(|i| serde_json::from_value(i).map_err(|e| format!("{}: {e}", p.display()))).collect()
    };
    match root {
        Some(root) => {
            let mut files: BTreeMap<PathBuf, ()> = BTreeMap::new();
            for entry in fs::read_dir(&root).map_err(|e| format!("{}: {e}", root.display()))? {
                let candidate = entry.map_err(|e| e.to_string())?.path().join("records.json");
                if candidate.is_file() {
                    files.insert(candidate, ());
                }
            }
            let mut out = Vec::new();
            for p in files.keys() {
                out.extend(decode(p, read(p)?)?);
            }
            Ok(out)
        }
        None => decode(path, read(path)?),
    }
}
