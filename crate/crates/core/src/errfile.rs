//! Parsing of the executor's typed `.err` files and criticality summaries.
//!
//! The accepted grammar is:
//!
//! ```text
//! Error: <message>
//! [<Key>: <value>]*            File:, Line:, assembly.ll line:, State: ...
//! [Stack:
//!   #<n> in <fn>(<arg>=<val>, ...) [at <file>:<line>]]   args may span lines
//! [Info:
//!   <key>: <value>]             continuation lines kept while parens are open
//! ```
//!
//! `example:` and `range: [<lo>, <hi>]` in the `Info:` block are decoded;
//! every other info entry is kept verbatim.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::klee::ErrorKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "value")]
pub enum ArgValue {
    Symbolic,
    Concrete(u64),
    /// Any token that is neither `symbolic` nor a decimal integer.
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameArg {
    pub name: String,
    pub value: ArgValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackFrame {
    pub index: u64,
    pub function: String,
    pub args: Vec<FrameArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KleeErrorRecord {
    pub test_id: String,
    pub kind: ErrorKind,
    pub message: String,
    pub stack: Vec<StackFrame>,
    /// Symbolic address expression from `address:`, kept verbatim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address_expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example_address: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address_range: Option<(u64, u64)>,
    /// `Key: value` header lines between the message and the stack, and
    /// info entries other than address/example/range.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
    pub raw_text: String,
    /// Some section could not be decoded; it is still present in `raw_text`.
    #[serde(default)]
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl KleeErrorRecord {
    /// Function of frame #0, where the fault was raised.
    pub fn faulting_function(&self) -> Option<&str> {
        self.stack.first().map(|f| f.function.as_str())
    }

    pub fn frame_args(&self) -> &[FrameArg] {
        self.stack.first().map_or(&[], |f| f.args.as_slice())
    }

    /// Inclusive width of the reported address range.
    pub fn range_width(&self) -> Option<u64> {
        self.address_range.map(|(lo, hi)| hi - lo + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed error record {test_id}: {reason}")]
    Malformed { test_id: String, reason: String, raw_text: String },
}

pub fn parse_error_file(text: &str, kind: ErrorKind, test_id: &str) -> Result<KleeErrorRecord, ParseError> {
    let malformed = |reason: &str| ParseError::Malformed {
        test_id: test_id.to_string(),
        reason: reason.to_string(),
        raw_text: text.to_string(),
    };
    let mut lines = text.lines().peekable();
    let first = lines.next().ok_or_else(|| malformed("empty file"))?;
    let message = first
        .trim_end()
        .strip_prefix("Error:")
        .ok_or_else(|| malformed("first line does not start with `Error:`"))?
        .trim()
        .to_string();

    let mut record = KleeErrorRecord {
        test_id: test_id.to_string(),
        kind,
        message,
        stack: Vec::new(),
        address_expr: None,
        example_address: None,
        address_range: None,
        extra: BTreeMap::new(),
        raw_text: text.to_string(),
        partial: false,
        warnings: Vec::new(),
    };

    #[derive(PartialEq)]
    enum Section {
        Header,
        Stack,
        Info,
    }
    let mut section = Section::Header;
    // Logical lines: physical lines joined while parentheses are unbalanced.
    let mut pending = String::new();
    let mut depth = 0i32;
    let mut logical: Vec<(bool, String)> = Vec::new();
    for line in lines {
        let is_section = depth == 0 && matches!(line.trim_end(), "Stack:" | "Info:");
        if is_section {
            logical.push((true, line.trim().to_string()));
            continue;
        }
        if pending.is_empty() {
            pending.push_str(line.trim());
        } else {
            pending.push(' ');
            pending.push_str(line.trim());
        }
        depth += paren_balance(line);
        if depth <= 0 {
            depth = 0;
            let done = core::mem::take(&mut pending);
            if !done.is_empty() {
                logical.push((false, done));
            }
        }
    }
    if !pending.is_empty() {
        record.partial = true;
        record.warnings.push("unbalanced parentheses at end of file".to_string());
        logical.push((false, pending));
    }

    for (is_section, line) in logical {
        if is_section {
            section = if line == "Stack:" { Section::Stack } else { Section::Info };
            continue;
        }
        match section {
            Section::Header => match line.split_once(':') {
                Some((k, v)) => {
                    record.extra.insert(k.trim().to_string(), v.trim().to_string());
                }
                None => record.partial = true,
            },
            Section::Stack => match parse_frame(&line) {
                Some(frame) => {
                    if frame.args.iter().any(|a| matches!(a.value, ArgValue::Other(_))) {
                        record.partial = true;
                    }
                    record.stack.push(frame);
                }
                None => record.partial = true,
            },
            Section::Info => {
                let Some((key, value)) = line.split_once(':') else {
                    record.partial = true;
                    continue;
                };
                let (key, value) = (key.trim(), value.trim());
                match key {
                    "address" => record.address_expr = Some(value.to_string()),
                    "example" => match value.parse::<u64>() {
                        Ok(v) => record.example_address = Some(v),
                        Err(_) => record.partial = true,
                    },
                    "range" => match parse_range(value) {
                        Some(r) => record.address_range = Some(r),
                        None => record.partial = true,
                    },
                    _ => {
                        record.extra.insert(format!("info.{key}"), value.to_string());
                    }
                }
            }
        }
    }

    if let (Some(ex), Some((lo, hi))) = (record.example_address, record.address_range) {
        if ex < lo || ex > hi {
            record.warnings.push(format!("example address {ex} outside range [{lo}, {hi}]"));
        }
    }
    if let Some(hint) = kind_hint(&record.message) {
        if hint != kind {
            record.warnings.push(format!("file suffix says {kind} but message suggests {hint}: {:?}", record.message));
        }
    }
    Ok(record)
}

fn paren_balance(line: &str) -> i32 {
    line.chars().fold(0, |acc, c| match c {
        '(' => acc + 1,
        ')' => acc - 1,
        _ => acc,
    })
}

fn parse_range(value: &str) -> Option<(u64, u64)> {
    let inner = value.strip_prefix('[')?.strip_suffix(']')?;
    let (lo, hi) = inner.split_once(',')?;
    let (lo, hi) = (lo.trim().parse().ok()?, hi.trim().parse().ok()?);
    (lo <= hi).then_some((lo, hi))
}

fn parse_frame(line: &str) -> Option<StackFrame> {
    let rest = line.strip_prefix('#')?;
    let digits_end = rest.find(|c: char| !c.is_ascii_digit())?;
    let index = rest[..digits_end].parse().ok()?;
    let rest = rest[digits_end..].trim_start().strip_prefix("in")?.trim_start();
    let open = rest.find('(')?;
    let function = rest[..open].trim().to_string();
    if function.is_empty() {
        return None;
    }
    let close = matching_paren(rest, open)?;
    let args_text = &rest[open + 1..close];
    let mut args = Vec::new();
    for part in split_top_level(args_text) {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (name, val) = part.split_once('=')?;
        let val = val.trim();
        let value = if val == "symbolic" {
            ArgValue::Symbolic
        } else if let Ok(v) = val.parse::<u64>() {
            ArgValue::Concrete(v)
        } else {
            ArgValue::Other(val.to_string())
        };
        args.push(FrameArg { name: name.trim().to_string(), value });
    }
    let location = rest[close + 1..].trim().strip_prefix("at").map(|l| l.trim().to_string());
    Some(StackFrame { index, function, args, location })
}

fn matching_paren(s: &str, open: usize) -> Option<usize> {
    let mut depth = 0;
    for (i, c) in s[open..].char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + i);
                }
            }
            _ => {}
        }
    }
    None
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

/// Best-effort guess of the kind a message describes; used only for
/// consistency warnings.
fn kind_hint(message: &str) -> Option<ErrorKind> {
    let m = message.to_ascii_lowercase();
    if m.starts_with("memory error") || m.contains("pointer") {
        Some(ErrorKind::Ptr)
    } else if m.contains("divide by zero") || m.contains("division") {
        Some(ErrorKind::Div)
    } else if m.contains("overflow") {
        Some(ErrorKind::Overflow)
    } else if m.starts_with("abort") {
        Some(ErrorKind::Abort)
    } else if m.contains("external") {
        Some(ErrorKind::External)
    } else {
        None
    }
}

/// Writes a record back out in the grammar accepted by [`parse_error_file`].
/// Intended for building fixtures.
pub fn render_error_file(record: &KleeErrorRecord) -> String {
    let mut out = format!("Error: {}\n", record.message);
    for (k, v) in record.extra.iter().filter(|(k, _)| !k.starts_with("info.")) {
        out.push_str(&format!("{k}: {v}\n"));
    }
    if !record.stack.is_empty() {
        out.push_str("Stack:\n");
        for frame in &record.stack {
            let args: Vec<String> = frame
                .args
                .iter()
                .map(|a| {
                    let v = match &a.value {
                        ArgValue::Symbolic => "symbolic".to_string(),
                        ArgValue::Concrete(v) => v.to_string(),
                        ArgValue::Other(s) => s.clone(),
                    };
                    format!("{}={}", a.name, v)
                })
                .collect();
            out.push_str(&format!("  #{} in {}({})", frame.index, frame.function, args.join(", ")));
            if let Some(loc) = &frame.location {
                out.push_str(&format!(" at {loc}"));
            }
            out.push('\n');
        }
    }
    let info_extra: Vec<_> = record.extra.iter().filter(|(k, _)| k.starts_with("info.")).collect();
    if record.address_expr.is_some()
        || record.example_address.is_some()
        || record.address_range.is_some()
        || !info_extra.is_empty()
    {
        out.push_str("Info:\n");
        if let Some(a) = &record.address_expr {
            out.push_str(&format!("  address: {a}\n"));
        }
        if let Some(e) = record.example_address {
            out.push_str(&format!("  example: {e}\n"));
        }
        if let Some((lo, hi)) = record.address_range {
            out.push_str(&format!("  range:   [{lo}, {hi}]\n"));
        }
        for (k, v) in info_extra {
            out.push_str(&format!("  {}: {v}\n", &k["info.".len()..]));
        }
    }
    out
}

/// Per-kind error counts for one file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalitySummary {
    pub ptr_count: u64,
    pub external_count: u64,
    pub abort_count: u64,
    pub div_count: u64,
    pub overflow_count: u64,
    pub critical_total: u64,
}

impl CriticalitySummary {
    pub fn count(&self, kind: ErrorKind) -> u64 {
        match kind {
            ErrorKind::Ptr => self.ptr_count,
            ErrorKind::External => self.external_count,
            ErrorKind::Abort => self.abort_count,
            ErrorKind::Div => self.div_count,
            ErrorKind::Overflow => self.overflow_count,
        }
    }

    pub fn add(&mut self, kind: ErrorKind, n: u64) {
        match kind {
            ErrorKind::Ptr => self.ptr_count += n,
            ErrorKind::External => self.external_count += n,
            ErrorKind::Abort => self.abort_count += n,
            ErrorKind::Div => self.div_count += n,
            ErrorKind::Overflow => self.overflow_count += n,
        }
        self.critical_total = self.ptr_count + self.external_count;
    }

    pub fn detected(&self) -> bool {
        self.critical_total >= 1
    }
}

pub fn summarize_criticality<'a, I>(records: I) -> CriticalitySummary
where
    I: IntoIterator<Item = &'a KleeErrorRecord>,
{
    summarize_kinds(records.into_iter().map(|r| r.kind))
}

pub fn summarize_kinds<I: IntoIterator<Item = ErrorKind>>(kinds: I) -> CriticalitySummary {
    let mut s = CriticalitySummary::default();
    for k in kinds {
        s.add(k, 1);
    }
    s
}

/// Confidence attached to each error kind in reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceWeights {
    pub ptr: f64,
    pub external: f64,
    pub abort: f64,
    pub div: f64,
    pub overflow: f64,
}

impl Default for ConfidenceWeights {
    fn default() -> Self {
        ConfidenceWeights { ptr: 1.0, external: 0.5, abort: 0.25, div: 0.25, overflow: 0.25 }
    }
}

impl ConfidenceWeights {
    pub fn weight(&self, kind: ErrorKind) -> f64 {
        match kind {
            ErrorKind::Ptr => self.ptr,
            ErrorKind::External => self.external,
            ErrorKind::Abort => self.abort,
            ErrorKind::Div => self.div,
            ErrorKind::Overflow => self.overflow,
        }
    }

    /// Sum of per-kind counts times their weights.
    pub fn weighted_score(&self, summary: &CriticalitySummary) -> f64 {
        ErrorKind::ALL.iter().map(|&k| self.weight(k) * summary.count(k) as f64).sum()
    }
}
