mod common;

use std::fs;

use common::*;
use serde_json::Value;
use snipsym::config::{ExecutorConfig, HarnessDefaults, ToolchainConfig};
use snipsym::ingest::{load_corpus, load_snippet};
use snipsym::pipeline::{finish_run, Pipeline, ARTIFACTS};
use snipsym_core::agent::{AgentBackend, BackendError, Role, RuleBackend};
use snipsym_core::errfile::ConfidenceWeights;
use snipsym_core::wrapper::TemplateLibrary;

struct Unreachable;

impl AgentBackend for Unreachable {
    fn respond(&self, _: Role, _: &Value) -> Result<Value, BackendError> {
        Err(BackendError("connection refused".into()))
    }
}

fn with_pipeline<R>(backend: &(dyn AgentBackend + Sync), f: impl FnOnce(&Pipeline) -> R) -> R {
    let templates = TemplateLibrary::builtin();
    let (toolchain, executor, harness) =
        (ToolchainConfig::default(), ExecutorConfig::default(), HarnessDefaults::default());
    let pipeline = Pipeline {
        backend,
        templates: &templates,
        toolchain: &toolchain,
        executor: &executor,
        harness: &harness,
        replay_root: Some(replay_root()),
    };
    f(&pipeline)
}

#[test]
fn slice_snippet_replays_recorded_errors() {
    let snippet = load_snippet(&corpus().join("cwe-131-cve-2020-35904.rs")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let backend = RuleBackend::default();
    let outcome = with_pipeline(&backend, |p| p.run_pipeline(&snippet, out.path())).unwrap();

    let r = &outcome.report;
    assert_eq!((r.summary.ptr_count, r.summary.external_count, r.summary.critical_total), (48, 704, 752));
    assert!(r.detected);
    assert_eq!(r.failed_stage, None);
    let dir = out.path().join("cwe-131-cve-2020-35904");
    for name in ARTIFACTS.iter().chain(&["records.json", "report.json"]) {
        assert!(dir.join(name).is_file(), "{name} missing");
        assert!(r.artifact_paths.contains_key(*name));
    }
    let harness = fs::read_to_string(dir.join("harness.c")).unwrap();
    assert!(harness.contains("klee_range("));
    assert_eq!(outcome.result.unwrap().records.len(), 752);
}

#[test]
fn backend_outage_marks_oracle_failure_and_continues() {
    let snippets: Vec<_> = load_corpus(&corpus()).unwrap().into_iter().take(3).map(Result::unwrap).collect();
    let out = tempfile::tempdir().unwrap();
    let outcomes = with_pipeline(&Unreachable, |p| p.analyze(&snippets, out.path(), 2)).unwrap();
    assert_eq!(outcomes.len(), 3);
    for o in &outcomes {
        assert_eq!(o.report.failed_stage.as_deref(), Some("oracle"));
        assert!(!o.report.detected);
        assert!(o.result.is_none());
        assert!(o.report.warnings.iter().any(|w| w.contains("connection refused")));
    }
    let summary = finish_run(out.path(), &outcomes, &ConfidenceWeights::default()).unwrap();
    assert_eq!(summary.metrics.detected, 0);
    assert_eq!(summary.graph.node_count(snipsym_core::graph::NodeKind::Cve), 0);
    assert!(schema_errors(&summary.report).is_empty());
}

#[test]
fn missing_recording_marks_executor_failure() {
    let snippet = load_snippet(&corpus().join("cwe-131-cve-2020-35904.rs")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let templates = TemplateLibrary::builtin();
    let (toolchain, executor, harness) =
        (ToolchainConfig::default(), ExecutorConfig::default(), HarnessDefaults::default());
    let backend = RuleBackend::default();
    let empty = tempfile::tempdir().unwrap();
    let pipeline = Pipeline {
        backend: &backend,
        templates: &templates,
        toolchain: &toolchain,
        executor: &executor,
        harness: &harness,
        replay_root: Some(empty.path().to_path_buf()),
    };
    let outcome = pipeline.run_pipeline(&snippet, out.path()).unwrap();
    assert_eq!(outcome.report.failed_stage.as_deref(), Some("executor"));
    // earlier artifacts are still persisted
    for name in ARTIFACTS {
        assert!(out.path().join("cwe-131-cve-2020-35904").join(name).is_file(), "{name}");
    }
}
