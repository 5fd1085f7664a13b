//! Compiling wrapper sources to bitcode.

use std::path::{Path, PathBuf};
use std::time::Duration;

use snipsym_core::wrapper::{compile_offline, CompileOutcome, TemplateLibrary, WrapperArtifact};

use crate::config::{Mode, ToolchainConfig};
use crate::process::{self, SpawnError};

#[derive(Debug, thiserror::Error)]
pub enum ToolchainError {
    #[error("toolchain unavailable: {0}")]
    Missing(String),
    #[error("compile timed out after {0} s")]
    Timeout(u64),
    #[error("{0}")]
    Io(String),
}

/// Compiles `artifact` into `<work_dir>/wrapper.bc`. In offline mode only
/// the source-level checks run and no bitcode is produced.
pub fn compile_wrapper(
    artifact: &WrapperArtifact,
    toolchain: &ToolchainConfig,
    work_dir: &Path,
) -> Result<CompileOutcome, ToolchainError> {
    if toolchain.mode == Mode::Offline {
        return Ok(compile_offline(&artifact.source_text));
    }
    std::fs::create_dir_all(work_dir).map_err(|e| ToolchainError::Io(format!("{}: {e}", work_dir.display())))?;
    let input = work_dir.join("wrapper.rs");
    let output = work_dir.join("wrapper.bc");
    std::fs::write(&input, &artifact.source_text)
        .map_err(|e| ToolchainError::Io(format!("{}: {e}", input.display())))?;
    let _ = std::fs::remove_file(&output);
    let argv = process::expand(
        &toolchain.command,
        &[("input", &input.to_string_lossy()), ("output", &output.to_string_lossy())],
        &[],
    );
    let done = process::run(&argv, Duration::from_secs(toolchain.timeout_s)).map_err(|e| match e {
        SpawnError::NotFound { program } => ToolchainError::Missing(program),
        other => ToolchainError::Io(other.to_string()),
    })?;
    if done.timed_out {
        return Err(ToolchainError::Timeout(toolchain.timeout_s));
    }
    if done.status.is_some_and(|s| s.success()) && output.is_file() {
        return Ok(CompileOutcome::Success { bitcode_path: Some(output.to_string_lossy().into_owned()) });
    }
    let diagnostic = if done.stderr.trim().is_empty() {
        format!("compiler exited with {:?} and no diagnostic", done.status.and_then(|s| s.code()))
    } else {
        done.stderr
    };
    Ok(CompileOutcome::Failure { diagnostic })
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateDirError {
    #[error("cannot read template directory {0}: {1}")]
    Read(PathBuf, std::io::Error),
    #[error(transparent)]
    Invalid(#[from] snipsym_core::wrapper::TemplateError),
}

/// The bundled templates overridden by `cwe-<n>.rs` and `generic.rs` files
/// from `dir`.
pub fn load_templates(dir: Option<&Path>) -> Result<TemplateLibrary, TemplateDirError> {
    let mut lib = TemplateLibrary::builtin();
    let Some(dir) = dir else { return Ok(lib) };
    let entries = std::fs::read_dir(dir).map_err(|e| TemplateDirError::Read(dir.into(), e))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for path in paths {
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        if path.extension().is_none_or(|e| e != "rs") {
            continue;
        }
        let cwe = if stem == "generic" {
            None
        } else if let Some(n) = stem.strip_prefix("cwe-").and_then(|n| n.parse().ok()) {
            Some(n)
        } else {
            continue;
        };
        let source = std::fs::read_to_string(&path).map_err(|e| TemplateDirError::Read(path.clone(), e))?;
        lib.insert(cwe, source)?;
    }
    Ok(lib)
}

#[cfg(test)]
mod tests {
    use super::*;
    use snipsym_core::wrapper::fallback_wrapper;

    #[test]
    fn offline_has_no_bitcode() {
        let dir = tempfile::tempdir().unwrap();
        let out = compile_wrapper(&fallback_wrapper(131), &ToolchainConfig::default(), dir.path()).unwrap();
        assert_eq!(out, CompileOutcome::Success { bitcode_path: None });
        assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
    }

    #[test]
    fn missing_toolchain() {
        let tc = ToolchainConfig { mode: Mode::Live, command: vec!["/nonexistent/rustc".into()], timeout_s: 5 };
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(compile_wrapper(&fallback_wrapper(131), &tc, dir.path()), Err(ToolchainError::Missing(_))));
    }

    #[test]
    fn template_override() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("cwe-416.rs"),
            "#[no_mangle]\npub extern \"C\" fn only(p: *mut u8) -> i32 { 0 }",
        )
        .unwrap();
        std::fs::write(dir.path().join("README"), "ignored").unwrap();
        let lib = load_templates(Some(dir.path())).unwrap();
        assert_eq!(lib.get(416).function_names, ["only"]);
        std::fs::write(dir.path().join("cwe-131.rs"), "fn nothing() {}").unwrap();
        assert!(load_templates(Some(dir.path())).is_err());
    }
}
