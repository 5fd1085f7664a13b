//! The JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use snipsym_core::errfile::ConfidenceWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Rule,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Offline,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutorMode {
    #[default]
    Replay,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    /// Chat-completions style endpoint.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub max_tokens: u32,
    pub timeout_s: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key_env: "SNIPSYM_API_KEY".into(),
            max_tokens: 2500,
            timeout_s: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolchainConfig {
    pub mode: Mode,
    /// argv template; `{input}` and `{output}` are substituted.
    pub command: Vec<String>,
    pub timeout_s: u64,
}

impl Default for ToolchainConfig {
    fn default() -> Self {
        let argv = [
            "rustc",
            "--edition=2021",
            "--crate-type=lib",
            "--emit=llvm-bc",
            "-g",
            "-C",
            "panic=abort",
            "-o",
            "{output}",
            "{input}",
        ];
        ToolchainConfig { mode: Mode::Offline, command: argv.map(String::from).into(), timeout_s: 120 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutorConfig {
    pub mode: ExecutorMode,
    /// Links the harness with the wrapper bitcode. Placeholders: `{harness}`,
    /// `{wrapper}`, `{output}`.
    pub link_command: Vec<String>,
    /// Executor argv. `{flags}` as a whole element expands to the mapped
    /// flags; `{output_dir}` and `{bitcode}` are substituted.
    pub command: Vec<String>,
    /// Environment variable that overrides the executor binary (argv[0]).
    pub binary_env: String,
    /// Directory holding one recorded output directory per file, named
    /// `cwe-<n>-cve-<yyyy>-<n>`. Defaults to `<corpus>/klee_output`.
    pub replay_root: Option<PathBuf>,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig {
            mode: ExecutorMode::Replay,
            link_command: vec![
                "sh".into(),
                "-c".into(),
                "clang -emit-llvm -c -g -O0 -Xclang -disable-O0-optnone {harness} -o {output}.harness.bc && llvm-link {output}.harness.bc {wrapper} -o {output}".into(),
            ],
            command: ["klee", "{flags}", "--output-dir={output_dir}", "{bitcode}"].map(String::from).into(),
            binary_env: "KLEE_BIN".into(),
            replay_root: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessDefaults {
    pub buffer_bytes: usize,
    pub index_bound: u64,
}

impl Default for HarnessDefaults {
    fn default() -> Self {
        HarnessDefaults { buffer_bytes: 128, index_bound: 10_000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendKind,
    pub remote: RemoteConfig,
    pub toolchain: ToolchainConfig,
    pub executor: ExecutorConfig,
    pub harness: HarnessDefaults,
    pub confidence_weights: ConfidenceWeights,
    /// Worker bound; defaults to the number of logical CPUs.
    pub workers: Option<usize>,
    /// Directory of `cwe-<n>.rs` / `generic.rs` templates overriding the
    /// bundled ones.
    pub templates_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
    }
}
