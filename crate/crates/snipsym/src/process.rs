//! Running external commands from argv templates with a hard timeout.

use std::io::Read;
use std::process::{Command, ExitStatus, Stdio};
use std::time::Duration;

use wait_timeout::ChildExt;

/// Substitutes `{key}` placeholders in every element. An element that is
/// exactly `{key}` for a multi-valued key expands in place.
pub fn expand(template: &[String], single: &[(&str, &str)], multi: &[(&str, &[String])]) -> Vec<String> {
    let mut out = Vec::new();
    for elem in template {
        if let Some((_, values)) = multi.iter().find(|(k, _)| *elem == format!("{{{k}}}")) {
            out.extend(values.iter().cloned());
            continue;
        }
        let mut s = elem.clone();
        for (k, v) in single {
            s = s.replace(&format!("{{{k}}}"), v);
        }
        out.push(s);
    }
    out
}

#[derive(Debug)]
pub struct Finished {
    pub status: Option<ExitStatus>,
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum SpawnError {
    #[error("empty command")]
    Empty,
    #[error("{program} not found")]
    NotFound { program: String },
    #[error("cannot run {program}: {source}")]
    Io { program: String, source: std::io::Error },
}

/// Runs `argv`, killing it after `timeout`. Output is captured on separate
/// threads so a chatty child cannot block on a full pipe.
pub fn run(argv: &[String], timeout: Duration) -> Result<Finished, SpawnError> {
    let (program, args) = argv.split_first().ok_or(SpawnError::Empty)?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| match source.kind() {
            std::io::ErrorKind::NotFound => SpawnError::NotFound { program: program.clone() },
            _ => SpawnError::Io { program: program.clone(), source },
        })?;
    let drain = |mut r: Box<dyn Read + Send>| {
        std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = r.read_to_end(&mut buf);
            String::from_utf8_lossy(&buf).into_owned()
        })
    };
    let out = drain(Box::new(child.stdout.take().expect("piped")));
    let err = drain(Box::new(child.stderr.take().expect("piped")));
    let waited = child.wait_timeout(timeout).map_err(|source| SpawnError::Io { program: program.clone(), source })?;
    let (status, timed_out) = match waited {
        Some(s) => (Some(s), false),
        None => {
            let _ = child.kill();
            let _ = child.wait();
            (None, true)
        }
    };
    Ok(Finished { status, stdout: out.join().unwrap_or_default(), stderr: err.join().unwrap_or_default(), timed_out })
}
