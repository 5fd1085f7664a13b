//! Loading snippet files and their identity metadata.

use std::fs;
use std::path::{Path, PathBuf};

use snipsym_core::snippet::{CveSnippet, Identity, IdentityError, SnippetError};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Snippet { path: PathBuf, source: SnippetError },
    #[error("{path}: sidecar {sidecar}: {source}")]
    Sidecar { path: PathBuf, sidecar: PathBuf, source: IdentityError },
}

/// `<dir>/<stem>.meta.json` for `<dir>/<stem>.<ext>`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().unwrap_or(path.as_os_str()).to_string_lossy();
    path.with_file_name(format!("{stem}.meta.json"))
}

/// Identity from a sidecar when present, otherwise from the file name.
pub fn resolve_identity(path: &Path) -> Result<Identity, IngestError> {
    let sidecar = sidecar_path(path);
    if sidecar.is_file() {
        let text =
            fs::read_to_string(&sidecar).map_err(|source| IngestError::Read { path: sidecar.clone(), source })?;
        return Identity::from_sidecar(&text).map_err(|source| IngestError::Sidecar {
            path: path.into(),
            sidecar,
            source,
        });
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Identity::from_name(&name).map_err(|e| IngestError::Snippet { path: path.into(), source: e.into() })
}

pub fn load_snippet(path: &Path) -> Result<CveSnippet, IngestError> {
    let bytes = fs::read(path).map_err(|source| IngestError::Read { path: path.into(), source })?;
    let text = String::from_utf8(bytes).map_err(|e| IngestError::Read {
        path: path.into(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })?;
    let identity = resolve_identity(path)?;
    let mut snippet = CveSnippet::new(identity, text, path.to_string_lossy())
        .map_err(|source| IngestError::Snippet { path: path.into(), source })?;
    snippet.manifest_present = path.parent().is_some_and(|d| d.join("Cargo.toml").is_file());
    Ok(snippet)
}

/// Snippet files of a corpus directory: every `.rs` file plus any file with
/// a sidecar, sorted by path. Not recursive.
pub fn corpus_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if !path.is_file() || path.to_string_lossy().ends_with(".meta.json") {
            continue;
        }
        if path.extension().is_some_and(|e| e == "rs") || sidecar_path(&path).is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn load_corpus(dir: &Path) -> Result<Vec<Result<CveSnippet, IngestError>>, IngestError> {
    let files = corpus_files(dir).map_err(|source| IngestError::Read { path: dir.into(), source })?;
    Ok(files.iter().map(|p| load_snippet(p)).collect())
}
