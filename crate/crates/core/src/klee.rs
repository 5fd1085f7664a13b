//! Executor parameters, command-line flag mapping and output-directory
//! naming rules.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// The typed error classes the executor writes as `<test>.<kind>.err`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Ptr,
    External,
    Abort,
    Div,
    Overflow,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 5] =
        [ErrorKind::Ptr, ErrorKind::External, ErrorKind::Abort, ErrorKind::Div, ErrorKind::Overflow];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Ptr => "ptr",
            ErrorKind::External => "external",
            ErrorKind::Abort => "abort",
            ErrorKind::Div => "div",
            ErrorKind::Overflow => "overflow",
        }
    }

    /// Pointer and external errors count toward detection.
    pub fn is_critical(self) -> bool {
        matches!(self, ErrorKind::Ptr | ErrorKind::External)
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown error kind {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStrategy {
    Dfs,
    Bfs,
    RandomPath,
}

impl SearchStrategy {
    /// Accepts `dfs`, `bfs`, `random-path` and `random_path`, ignoring case.
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "dfs" => Some(SearchStrategy::Dfs),
            "bfs" => Some(SearchStrategy::Bfs),
            "random-path" => Some(SearchStrategy::RandomPath),
            _ => None,
        }
    }

    pub fn flag_value(self) -> &'static str {
        match self {
            SearchStrategy::Dfs => "dfs",
            SearchStrategy::Bfs => "bfs",
            SearchStrategy::RandomPath => "random-path",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KleeParams {
    pub search_strategy: SearchStrategy,
    pub time_limit_s: u32,
    pub memory_limit_mb: u32,
    pub max_fork_depth: u32,
}

impl Default for KleeParams {
    fn default() -> Self {
        KleeParams { search_strategy: SearchStrategy::Dfs, time_limit_s: 60, memory_limit_mb: 1024, max_fork_depth: 64 }
    }
}

/// Maps parameters onto executor flags, in a fixed order.
pub fn select_flags(params: &KleeParams) -> Vec<String> {
    [
        format!("--search={}", params.search_strategy.flag_value()),
        format!("--max-time={}s", params.time_limit_s),
        format!("--max-memory={}", params.memory_limit_mb),
        format!("--max-depth={}", params.max_fork_depth),
    ]
    .into()
}

/// What a file name in an executor output directory denotes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutputEntry {
    Error {
        test_id: String,
        kind: ErrorKind,
    },
    TestCase {
        test_id: String,
    },
    Stats,
    /// An `.err` file whose test id or kind is not recognised.
    Unrecognized,
    Other,
}

pub fn is_test_id(s: &str) -> bool {
    s.len() == 10 && s.starts_with("test") && s[4..].bytes().all(|b| b.is_ascii_digit())
}

pub fn classify_entry(file_name: &str) -> OutputEntry {
    if file_name == "run.stats" || file_name == "info" {
        return OutputEntry::Stats;
    }
    if let Some(stem) = file_name.strip_suffix(".err") {
        let Some((test_id, kind)) = stem.split_once('.') else {
            return OutputEntry::Unrecognized;
        };
        return match kind.parse::<ErrorKind>() {
            Ok(kind) if is_test_id(test_id) => OutputEntry::Error { test_id: test_id.to_string(), kind },
            _ => OutputEntry::Unrecognized,
        };
    }
    if let Some(test_id) = file_name.strip_suffix(".ktest") {
        if is_test_id(test_id) {
            return OutputEntry::TestCase { test_id: test_id.to_string() };
        }
    }
    OutputEntry::Other
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorFileEntry {
    pub test_id: String,
    pub kind: ErrorKind,
    pub path: String,
}

/// A snapshot of one executor output directory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDirListing {
    pub dir: String,
    pub error_files: Vec<ErrorFileEntry>,
    pub test_files: Vec<String>,
    pub stats_present: bool,
    /// `.err` files with an unrecognised suffix or test id.
    pub quarantined: Vec<String>,
    /// Set when the executor was stopped before it finished.
    #[serde(default)]
    pub partial: bool,
}

impl OutputDirListing {
    /// Builds a listing from the file names of `dir`. `join` produces the full
    /// path of a name. Entries are sorted by path.
    pub fn from_names<'a, I, J>(dir: &str, names: I, join: J) -> Self
    where
        I: IntoIterator<Item = &'a str>,
        J: Fn(&str) -> String,
    {
        let mut listing = OutputDirListing { dir: dir.to_string(), ..Default::default() };
        for name in names {
            match classify_entry(name) {
                OutputEntry::Error { test_id, kind } => {
                    listing.error_files.push(ErrorFileEntry { test_id, kind, path: join(name) })
                }
                OutputEntry::TestCase { .. } => listing.test_files.push(join(name)),
                OutputEntry::Stats => listing.stats_present = true,
                OutputEntry::Unrecognized => listing.quarantined.push(join(name)),
                OutputEntry::Other => {}
            }
        }
        listing.error_files.sort_by(|a, b| a.path.cmp(&b.path));
        listing.test_files.sort();
        listing.quarantined.sort();
        listing
    }
}
