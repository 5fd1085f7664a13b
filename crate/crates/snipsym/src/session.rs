//! Executor sessions: running the symbolic executor or replaying a recorded
//! output directory, and parsing what it left behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use snipsym_core::errfile::{parse_error_file, KleeErrorRecord, ParseError};
use snipsym_core::klee::{select_flags, KleeParams, OutputDirListing};

use crate::config::ExecutorConfig;
use crate::process::{self, SpawnError};

#[derive(Debug, Clone)]
pub enum ExecutorSession {
    Live { command: Vec<String>, output_dir: PathBuf },
    Replay { dir: PathBuf },
}

impl ExecutorSession {
    /// A live session whose argv[0] is taken from `config.binary_env` when
    /// that variable is set.
    pub fn live(config: &ExecutorConfig, output_dir: PathBuf) -> Self {
        let mut command = config.command.clone();
        if let (Ok(bin), Some(first)) = (std::env::var(&config.binary_env), command.first_mut()) {
            *first = bin;
        }
        ExecutorSession::Live { command, output_dir }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("executor not found: {0}")]
    ExecutorMissing(String),
    #[error("executor exited with {code:?} and produced no output: {stderr}")]
    Failed { code: Option<i32>, stderr: String },
    #[error("replay directory {0} does not exist")]
    ReplayMissing(PathBuf),
    #[error("live session needs a bitcode file")]
    NoBitcode,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Read-only snapshot of an output directory.
pub fn scan_dir(dir: &Path) -> Result<OutputDirListing, SessionError> {
    let io = |source| SessionError::Io { path: dir.into(), source };
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let entry = entry.map_err(io)?;
        if entry.file_type().map_err(io)?.is_file() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    Ok(OutputDirListing::from_names(&dir.to_string_lossy(), names.iter().map(String::as_str), |n| {
        dir.join(n).to_string_lossy().into_owned()
    }))
}

pub fn run(
    session: &ExecutorSession,
    bitcode: Option<&Path>,
    params: &KleeParams,
) -> Result<OutputDirListing, SessionError> {
    match session {
        ExecutorSession::Replay { dir } => {
            if !dir.is_dir() {
                return Err(SessionError::ReplayMissing(dir.clone()));
            }
            scan_dir(dir)
        }
        ExecutorSession::Live { command, output_dir } => {
            let bitcode = bitcode.ok_or(SessionError::NoBitcode)?;
            // the executor refuses to reuse an existing output directory
            if output_dir.exists() {
                fs::remove_dir_all(output_dir)
                    .map_err(|source| SessionError::Io { path: output_dir.clone(), source })?;
            }
            let argv = process::expand(
                command,
                &[("output_dir", &output_dir.to_string_lossy()), ("bitcode", &bitcode.to_string_lossy())],
                &[("flags", &select_flags(params))],
            );
            let timeout = Duration::from_secs(2 * u64::from(params.time_limit_s));
            let done = process::run(&argv, timeout).map_err(|e| match e {
                SpawnError::NotFound { program } => SessionError::ExecutorMissing(program),
                SpawnError::Empty => SessionError::ExecutorMissing(String::new()),
                SpawnError::Io { program, source } => SessionError::Io { path: program.into(), source },
            })?;
            log::debug!("executor stdout: {}", done.stdout);
            let mut listing = if output_dir.is_dir() { scan_dir(output_dir)? } else { OutputDirListing::default() };
            let empty = listing.error_files.is_empty() && listing.test_files.is_empty();
            if done.timed_out {
                log::warn!("executor timed out after {} s; keeping partial results", timeout.as_secs());
                listing.partial = true;
            } else if !done.status.is_some_and(|s| s.success()) && empty {
                return Err(SessionError::Failed { code: done.status.and_then(|s| s.code()), stderr: done.stderr });
            }
            Ok(listing)
        }
    }
}

/// Records parsed from a listing, plus what could not be parsed.
#[derive(Debug, Default)]
pub struct ParsedOutput {
    pub records: Vec<KleeErrorRecord>,
    pub malformed: Vec<ParseError>,
    pub unreadable: Vec<String>,
}

pub fn parse_listing(listing: &OutputDirListing) -> ParsedOutput {
    let mut out = ParsedOutput::default();
    for entry in &listing.error_files {
        let text = match fs::read(&entry.path) {
            Ok(bytes) => String::from_utf8_lossy(&bytes).into_owned(),
            Err(e) => {
                out.unreadable.push(format!("{}: {e}", entry.path));
                continue;
            }
        };
        match parse_error_file(&text, entry.kind, &entry.test_id) {
            Ok(r) => out.records.push(r),
            Err(e) => out.malformed.push(e),
        }
    }
    out
}
