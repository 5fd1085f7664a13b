#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::Value;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn corpus() -> PathBuf {
    repo_root().join("fixtures/corpus")
}

pub fn replay_root() -> PathBuf {
    corpus().join("klee_output")
}

pub struct CliRun {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CliRun {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", self.stdout))
    }
}

pub fn cli<S: AsRef<str>>(args: &[S]) -> CliRun {
    let mut argv = vec!["snipsym".to_string()];
    argv.extend(args.iter().map(|a| a.as_ref().to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = snipsym::cli::run(argv, &mut out, &mut err);
    CliRun { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Validation errors of `report` against the bundled report schema.
pub fn schema_errors(report: &Value) -> Vec<String> {
    let schema = read_json(&repo_root().join("docs/report.schema.json"));
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    validator.iter_errors(report).map(|e| format!("{} at {}", e, e.instance_path())).collect()
}

pub fn p(path: &Path) -> String {
    path.to_str().unwrap().to_string()
}
