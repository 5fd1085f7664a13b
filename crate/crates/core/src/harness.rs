//! C harness generation for symbolic execution of FFI wrappers.
//!
//! Every byte-pointer parameter shares one symbolic buffer. Scalars are named
//! by kind and position within their function: the k-th `size` parameter of
//! any function is `idx<k>`, the k-th `byte` is `val<k>`, the k-th `int32` is
//! `num<k>`. Each `idx` variable is bounded by `index_bound`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wrapper::{FfiSignature, ParamKind};

pub const MAX_SIGNATURES: usize = 16;
pub const MAX_SCALAR_PARAMS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnessSpec {
    pub signatures: Vec<FfiSignature>,
    pub buffer_bytes: usize,
    pub index_bound: u64,
}

impl HarnessSpec {
    pub fn new(signatures: Vec<FfiSignature>) -> Self {
        HarnessSpec { signatures, buffer_bytes: 128, index_bound: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnessSource {
    pub text: String,
    pub path_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("harness needs at least one signature")]
    Empty,
    #[error("{0} signatures exceed the limit of {MAX_SIGNATURES}")]
    TooManySignatures(usize),
    #[error("function `{0}` has more than {MAX_SCALAR_PARAMS} scalar parameters")]
    TooManyScalars(String),
    #[error("buffer_bytes and index_bound must be at least 1")]
    BadBounds,
}

fn c_type(kind: ParamKind) -> &'static str {
    match kind {
        ParamKind::BytePointer => "unsigned char *",
        ParamKind::Size => "size_t",
        ParamKind::Int32 => "int32_t",
        ParamKind::Byte => "unsigned char",
    }
}

/// `extern int32_t name(<params>);`
pub fn render_extern_decl(sig: &FfiSignature) -> String {
    let params = if sig.params.is_empty() {
        String::from("void")
    } else {
        sig.params
            .iter()
            .map(|p| match p.kind {
                ParamKind::BytePointer => format!("unsigned char *{}", p.name),
                k => format!("{} {}", c_type(k), p.name),
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!("extern int32_t {}({});", sig.name, params)
}

/// Variable passed for each parameter of `sig`.
fn call_args(sig: &FfiSignature) -> Vec<String> {
    let (mut idx, mut val, mut num) = (0, 0, 0);
    sig.kinds()
        .map(|k| match k {
            ParamKind::BytePointer => String::from("buffer"),
            ParamKind::Size => {
                idx += 1;
                format!("idx{idx}")
            }
            ParamKind::Byte => {
                val += 1;
                format!("val{val}")
            }
            ParamKind::Int32 => {
                num += 1;
                format!("num{num}")
            }
        })
        .collect()
}

fn max_of_kind(sigs: &[FfiSignature], kind: ParamKind) -> usize {
    sigs.iter().map(|s| s.kinds().filter(|&k| k == kind).count()).max().unwrap_or(0)
}

pub fn generate_harness(spec: &HarnessSpec) -> Result<HarnessSource, HarnessError> {
    let sigs = &spec.signatures;
    if sigs.is_empty() {
        return Err(HarnessError::Empty);
    }
    if sigs.len() > MAX_SIGNATURES {
        return Err(HarnessError::TooManySignatures(sigs.len()));
    }
    if spec.buffer_bytes == 0 || spec.index_bound == 0 {
        return Err(HarnessError::BadBounds);
    }
    if let Some(s) =
        sigs.iter().find(|s| s.kinds().filter(|&k| k != ParamKind::BytePointer).count() > MAX_SCALAR_PARAMS)
    {
        return Err(HarnessError::TooManyScalars(s.name.clone()));
    }

    let n_idx = max_of_kind(sigs, ParamKind::Size);
    let n_num = max_of_kind(sigs, ParamKind::Int32);
    let n_val = max_of_kind(sigs, ParamKind::Byte);
    let names = |prefix: &str, n: usize| (1..=n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>();
    let (idx, num, val) = (names("idx", n_idx), names("num", n_num), names("val", n_val));

    let mut out = String::new();
    out.push_str("#include <klee/klee.h>\n#include <stdint.h>\n#include <string.h>\n\n");
    for sig in sigs {
        let _ = writeln!(out, "{}", render_extern_decl(sig));
    }
    out.push_str("\nint main() {\n");
    for (ty, vars) in [("size_t", &idx), ("int32_t", &num), ("unsigned char", &val)] {
        if !vars.is_empty() {
            let _ = writeln!(out, "    {ty} {};", vars.join(", "));
        }
    }
    let _ = writeln!(out, "    unsigned char buffer[{}];\n", spec.buffer_bytes);
    for v in idx.iter().chain(&num).chain(&val) {
        let _ = writeln!(out, "    klee_make_symbolic(&{v}, sizeof({v}), \"{v}\");");
    }
    out.push_str("    klee_make_symbolic(buffer, sizeof(buffer), \"buffer\");\n\n");
    if !idx.is_empty() {
        for v in &idx {
            let _ = writeln!(out, "    klee_assume({v} < {});", spec.index_bound);
        }
        out.push('\n');
    }
    let _ = writeln!(out, "    int path = klee_range(0, {}, \"path\");\n", sigs.len());
    for (i, sig) in sigs.iter().enumerate() {
        let head = if i == 0 { "    if" } else { " else if" };
        let _ = write!(out, "{head} (path == {i}) {{\n        {}({});\n    }}", sig.name, call_args(sig).join(", "));
    }
    out.push_str("\n    return 0;\n}\n");

    Ok(HarnessSource { text: out, path_count: sigs.len() })
}

/// Splits C source into tokens, ignoring all whitespace. Used to compare
/// harnesses against golden files.
pub fn c_tokens(text: &str) -> Vec<String> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    let mut in_str = false;
    for c in text.chars() {
        if in_str {
            cur.push(c);
            if c == '"' {
                toks.push(core::mem::take(&mut cur));
                in_str = false;
            }
            continue;
        }
        if c.is_alphanumeric() || c == '_' {
            cur.push(c);
            continue;
        }
        if !cur.is_empty() {
            toks.push(core::mem::take(&mut cur));
        }
        if c == '"' {
            cur.push(c);
            in_str = true;
        } else if !c.is_whitespace() {
            toks.push(String::from(c));
        }
    }
    if !cur.is_empty() {
        toks.push(cur);
    }
    toks
}
