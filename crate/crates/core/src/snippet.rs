//! CVE snippet identity and the missing-context profile.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lex::{tokenize, Token};

/// Names that are ambient in every Rust module and never reported as
/// unresolved.
pub const PRELUDE_ALLOWLIST: [&str; 12] =
    ["Vec", "String", "Box", "Option", "Result", "Some", "None", "Ok", "Err", "Drop", "Clone", "Copy"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("invalid CVE id {0:?}: expected CVE-<yyyy>-<n>")]
    BadCveId(String),
    #[error("invalid CWE id {0}: must be positive")]
    BadCweId(i64),
    #[error("name {0:?} does not follow the cwe-<n>-cve-<yyyy>-<n> convention")]
    NoNamingConvention(String),
    #[error("sidecar metadata is malformed: {0}")]
    BadSidecar(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnippetError {
    #[error("empty snippet")]
    Empty,
    #[error(transparent)]
    Identity(#[from] IdentityError),
}

/// A validated `CVE-<yyyy>-<n>` identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CveId(String);

impl CveId {
    pub fn parse(s: &str) -> Result<Self, IdentityError> {
        let bad = || IdentityError::BadCveId(s.to_string());
        let rest = s.strip_prefix("CVE-").ok_or_else(bad)?;
        let (year, num) = rest.split_once('-').ok_or_else(bad)?;
        let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
        if year.len() != 4 || !digits(year) || num.len() > 7 || !digits(num) {
            return Err(bad());
        }
        Ok(CveId(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for CveId {
    type Error = IdentityError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        CveId::parse(&s)
    }
}

impl From<CveId> for String {
    fn from(id: CveId) -> String {
        id.0
    }
}

/// CVE and CWE identity of one analysed file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Identity {
    pub cve_id: CveId,
    pub cwe_id: u32,
}

impl Identity {
    pub fn new(cve_id: CveId, cwe_id: u32) -> Result<Self, IdentityError> {
        if cwe_id == 0 {
            return Err(IdentityError::BadCweId(0));
        }
        Ok(Identity { cve_id, cwe_id })
    }

    /// The `cwe-<n>-cve-<yyyy>-<n>` directory name used for output folders.
    pub fn dir_name(&self) -> String {
        format!("cwe-{}-{}", self.cwe_id, self.cve_id.as_str().to_ascii_lowercase())
    }

    /// Parses identity from a file or directory name such as
    /// `cwe-131-cve-2020-35904.rs`. The match is case-insensitive and may be
    /// surrounded by other text.
    pub fn from_name(name: &str) -> Result<Self, IdentityError> {
        let lower = name.to_ascii_lowercase();
        let bytes = lower.as_bytes();
        let mut search = 0;
        while let Some(pos) = lower[search..].find("cwe-") {
            let start = search + pos;
            search = start + 4;
            let mut i = start + 4;
            let cwe = take_digits(bytes, &mut i);
            let Some(cwe) = cwe else { continue };
            if !lower[i..].starts_with("-cve-") {
                continue;
            }
            i += 5;
            let year_start = i;
            let Some(_) = take_digits(bytes, &mut i) else { continue };
            if i - year_start != 4 || bytes.get(i) != Some(&b'-') {
                continue;
            }
            let year = &lower[year_start..i];
            i += 1;
            let num_start = i;
            let Some(_) = take_digits(bytes, &mut i) else { continue };
            let num = &lower[num_start..i];
            let Ok(cwe_id) = cwe.parse::<u32>() else { continue };
            let cve_id = CveId::parse(&format!("CVE-{year}-{num}"))?;
            return Identity::new(cve_id, cwe_id);
        }
        Err(IdentityError::NoNamingConvention(name.to_string()))
    }

    /// Parses a `{"cve": "...", "cwe": n}` sidecar document.
    pub fn from_sidecar(json: &str) -> Result<Self, IdentityError> {
        #[derive(Deserialize)]
        struct Sidecar {
            cve: String,
            cwe: i64,
        }
        let meta: Sidecar = serde_json::from_str(json).map_err(|e| IdentityError::BadSidecar(e.to_string()))?;
        let cve_id = CveId::parse(&meta.cve)?;
        let cwe_id = u32::try_from(meta.cwe).ok().filter(|&c| c > 0).ok_or(IdentityError::BadCweId(meta.cwe))?;
        Identity::new(cve_id, cwe_id)
    }
}

fn take_digits<'a>(bytes: &'a [u8], i: &mut usize) -> Option<&'a str> {
    let start = *i;
    while *i < bytes.len() && bytes[*i].is_ascii_digit() {
        *i += 1;
    }
    if *i == start {
        None
    } else {
        core::str::from_utf8(&bytes[start..*i]).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CveSnippet {
    pub cve_id: CveId,
    pub cwe_id: u32,
    pub source_text: String,
    pub origin_path: String,
    pub line_count: usize,
    /// Whether a build manifest accompanies the source file.
    #[serde(default)]
    pub manifest_present: bool,
}

impl CveSnippet {
    pub fn new(identity: Identity, source_text: String, origin_path: impl Into<String>) -> Result<Self, SnippetError> {
        if source_text.trim().is_empty() {
            return Err(SnippetError::Empty);
        }
        let line_count = source_text.lines().count().max(1);
        Ok(CveSnippet {
            cve_id: identity.cve_id,
            cwe_id: identity.cwe_id,
            source_text,
            origin_path: origin_path.into(),
            line_count,
            manifest_present: false,
        })
    }

    pub fn identity(&self) -> Identity {
        Identity { cve_id: self.cve_id.clone(), cwe_id: self.cwe_id }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingContextProfile {
    pub missing_struct_defs: bool,
    pub missing_imports: bool,
    pub missing_manifest: bool,
    pub missing_trait_impls: bool,
    pub unresolved_identifiers: Vec<String>,
}

const DECL_KEYWORDS: [&str; 5] = ["struct", "enum", "union", "trait", "type"];

/// Flags the kinds of context a snippet is missing, using token-level
/// heuristics only.
pub fn profile_missing_context(snippet: &CveSnippet) -> MissingContextProfile {
    let toks = tokenize(&snippet.source_text);
    let scan = Scan::new(&toks);

    let mut unresolved = BTreeSet::new();
    let known = |name: &str| {
        scan.declared.contains(name)
            || scan.imported.contains(name)
            || scan.generics.contains(name)
            || PRELUDE_ALLOWLIST.contains(&name)
            || name == "Self"
    };

    let mut unknown_path_heads = false;
    let mut unknown_types = false;
    for (i, t) in toks.iter().enumerate() {
        let Some(name) = t.ident() else { continue };
        if !starts_upper(name) || known(name) {
            continue;
        }
        // Declaration sites and macro names are not references.
        if i > 0 && toks[i - 1].ident().is_some_and(|p| DECL_KEYWORDS.contains(&p)) {
            continue;
        }
        if toks.get(i + 1).is_some_and(|n| n.is_punct('!')) {
            continue;
        }
        unresolved.insert(name.to_string());
        if is_path_head(&toks, i) {
            unknown_path_heads = true;
        } else {
            unknown_types = true;
        }
    }

    let mut unresolved_fields = false;
    for field in &scan.self_fields {
        if !scan.struct_fields.contains(field.as_str()) {
            unresolved.insert(field.clone());
            unresolved_fields = true;
        }
    }

    let mut bad_impl_header = false;
    for name in &scan.impl_header_names {
        if !known(name) {
            unresolved.insert(name.clone());
            bad_impl_header = true;
        }
    }

    let no_type_decls = scan.struct_like_decls == 0;
    MissingContextProfile {
        missing_struct_defs: unknown_types || (unresolved_fields && no_type_decls),
        missing_imports: unknown_path_heads || unknown_types,
        missing_manifest: !snippet.manifest_present,
        missing_trait_impls: bad_impl_header || scan.orphan_receiver,
        unresolved_identifiers: unresolved.into_iter().collect(),
    }
}

fn starts_upper(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

fn is_path_head(toks: &[Token], i: usize) -> bool {
    toks.get(i + 1).is_some_and(|t| t.is_punct(':')) && toks.get(i + 2).is_some_and(|t| t.is_punct(':'))
}

/// Facts collected in one pass over the token stream.
struct Scan {
    declared: BTreeSet<String>,
    imported: BTreeSet<String>,
    generics: BTreeSet<String>,
    struct_fields: BTreeSet<String>,
    self_fields: BTreeSet<String>,
    impl_header_names: Vec<String>,
    struct_like_decls: usize,
    /// A method with a `self` receiver appears outside any `impl` block.
    orphan_receiver: bool,
}

impl Scan {
    fn new(toks: &[Token]) -> Self {
        let mut s = Scan {
            declared: BTreeSet::new(),
            imported: BTreeSet::new(),
            generics: BTreeSet::new(),
            struct_fields: BTreeSet::new(),
            self_fields: BTreeSet::new(),
            impl_header_names: Vec::new(),
            struct_like_decls: 0,
            orphan_receiver: false,
        };
        // Brace depth at which each open `impl`/`trait` body started.
        let mut impl_depths: Vec<usize> = Vec::new();
        let mut pending_impl = false;
        let mut depth = 0usize;
        let mut i = 0;
        while i < toks.len() {
            let t = &toks[i];
            match t.ident() {
                Some("use") => {
                    let mut j = i + 1;
                    while j < toks.len() && !toks[j].is_punct(';') {
                        if let Some(n) = toks[j].ident() {
                            s.imported.insert(n.to_string());
                        }
                        j += 1;
                    }
                    i = j;
                    continue;
                }
                Some(kw) if DECL_KEYWORDS.contains(&kw) => {
                    if let Some(name) = toks.get(i + 1).and_then(Token::ident) {
                        s.declared.insert(name.to_string());
                        if kw != "trait" && kw != "type" {
                            s.struct_like_decls += 1;
                        }
                        collect_generics(toks, i + 2, &mut s.generics);
                        if kw == "struct" || kw == "union" {
                            collect_struct_fields(toks, i + 2, &mut s.struct_fields);
                        }
                        if kw == "trait" {
                            pending_impl = true;
                        }
                    }
                }
                Some("fn") => {
                    if let Some(name) = toks.get(i + 1).and_then(Token::ident) {
                        s.declared.insert(name.to_string());
                        collect_generics(toks, i + 2, &mut s.generics);
                    }
                    if impl_depths.is_empty() && has_self_receiver(toks, i + 1) {
                        s.orphan_receiver = true;
                    }
                }
                Some("impl") => {
                    collect_generics(toks, i + 1, &mut s.generics);
                    s.impl_header_names.extend(impl_header(toks, i + 1));
                    pending_impl = true;
                }
                Some("self") if toks.get(i + 1).is_some_and(|n| n.is_punct('.')) => {
                    if let Some(field) = toks.get(i + 2).and_then(Token::ident) {
                        let is_call = toks.get(i + 3).is_some_and(|n| n.is_punct('('));
                        let is_tuple_index = field.chars().all(|c| c.is_ascii_digit());
                        if !is_call && !is_tuple_index {
                            s.self_fields.insert(field.to_string());
                        }
                    }
                }
                _ => {}
            }
            if t.is_punct('{') {
                if pending_impl {
                    impl_depths.push(depth);
                    pending_impl = false;
                }
                depth += 1;
            } else if t.is_punct('}') {
                depth = depth.saturating_sub(1);
                if impl_depths.last() == Some(&depth) {
                    impl_depths.pop();
                }
            } else if t.is_punct(';') && pending_impl {
                pending_impl = false;
            }
            i += 1;
        }
        s
    }
}

/// Collects identifiers inside a `<...>` list that starts at `at`.
fn collect_generics(toks: &[Token], at: usize, out: &mut BTreeSet<String>) {
    if !toks.get(at).is_some_and(|t| t.is_punct('<')) {
        return;
    }
    let mut depth = 0i32;
    let mut expect_param = true;
    for t in &toks[at..] {
        if t.is_punct('<') {
            depth += 1;
            expect_param = depth == 1;
            continue;
        }
        if t.is_punct('>') {
            depth -= 1;
            if depth == 0 {
                break;
            }
            continue;
        }
        if depth == 1 && t.is_punct(',') {
            expect_param = true;
            continue;
        }
        if depth == 1 && expect_param {
            if let Some(n) = t.ident() {
                if n != "const" {
                    out.insert(n.to_string());
                    expect_param = false;
                }
            }
        }
    }
}

/// Collects `name:` pairs from the brace body of a struct declaration.
fn collect_struct_fields(toks: &[Token], at: usize, out: &mut BTreeSet<String>) {
    let mut j = at;
    while j < toks.len() && !toks[j].is_punct('{') && !toks[j].is_punct(';') && !toks[j].is_punct('(') {
        j += 1;
    }
    if !toks.get(j).is_some_and(|t| t.is_punct('{')) {
        return;
    }
    let mut depth = 0;
    while j < toks.len() {
        let t = &toks[j];
        if t.is_punct('{') {
            depth += 1;
        } else if t.is_punct('}') {
            depth -= 1;
            if depth == 0 {
                return;
            }
        } else if depth == 1 {
            let single_colon =
                toks.get(j + 1).is_some_and(|n| n.is_punct(':')) && !toks.get(j + 2).is_some_and(|n| n.is_punct(':'));
            if let (Some(n), true) = (t.ident(), single_colon) {
                out.insert(n.to_string());
            }
        }
        j += 1;
    }
}

/// Names in an `impl [<..>] Trait for Type` header; empty for inherent impls.
fn impl_header(toks: &[Token], mut at: usize) -> Vec<String> {
    if toks.get(at).is_some_and(|t| t.is_punct('<')) {
        let mut depth = 0;
        while at < toks.len() {
            if toks[at].is_punct('<') {
                depth += 1;
            } else if toks[at].is_punct('>') {
                depth -= 1;
                if depth == 0 {
                    at += 1;
                    break;
                }
            }
            at += 1;
        }
    }
    let end = toks[at.min(toks.len())..]
        .iter()
        .position(|t| t.is_punct('{') || t.is_ident("where") || t.is_punct(';'))
        .map_or(toks.len(), |p| at + p);
    let header = &toks[at.min(end)..end];
    let Some(for_pos) = header.iter().position(|t| t.is_ident("for")) else {
        return Vec::new();
    };
    let first_ident = |slice: &[Token]| {
        slice.iter().filter_map(Token::ident).find(|n| *n != "dyn" && *n != "mut" && *n != "const").map(String::from)
    };
    let mut names = Vec::new();
    // The last path segment before any generic args names the trait.
    let trait_name =
        header[..for_pos].iter().take_while(|t| !t.is_punct('<')).filter_map(Token::ident).last().map(String::from);
    names.extend(trait_name);
    names.extend(first_ident(&header[for_pos + 1..]));
    names
}

fn has_self_receiver(toks: &[Token], at: usize) -> bool {
    let Some(open) = toks[at..].iter().take(16).position(|t| t.is_punct('(')) else {
        return false;
    };
    toks[at + open + 1..].iter().take_while(|t| !t.is_punct(',') && !t.is_punct(')')).any(|t| t.is_ident("self"))
}
