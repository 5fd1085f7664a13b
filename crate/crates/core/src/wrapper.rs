//! FFI wrapper artifacts: signature extraction, the fallback template
//! library and the offline compile check.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lex::{tokenize, Token, TokenKind};

/// Parameter kinds a symbolic harness can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    BytePointer,
    Size,
    Int32,
    Byte,
}

impl ParamKind {
    fn from_rust(ty: &str) -> Option<Self> {
        match ty {
            "*mut u8" | "*const u8" => Some(ParamKind::BytePointer),
            "usize" => Some(ParamKind::Size),
            "i32" => Some(ParamKind::Int32),
            "u8" => Some(ParamKind::Byte),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FfiParam {
    pub name: String,
    pub kind: ParamKind,
}

/// An exported C-ABI function. Every wrapper function returns `int32`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FfiSignature {
    pub name: String,
    pub params: Vec<FfiParam>,
}

impl FfiSignature {
    pub fn new(name: &str, params: &[(&str, ParamKind)]) -> Self {
        FfiSignature {
            name: name.to_string(),
            params: params.iter().map(|&(n, kind)| FfiParam { name: n.to_string(), kind }).collect(),
        }
    }

    pub fn kinds(&self) -> impl Iterator<Item = ParamKind> + '_ {
        self.params.iter().map(|p| p.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("no exported functions")]
    NoExportedFunctions,
    #[error("duplicate exported function `{0}`")]
    Duplicate(String),
    #[error("function `{function}`: parameter `{param}` has incompatible type `{ty}`")]
    IncompatibleParam { function: String, param: String, ty: String },
    #[error("function `{function}`: return type `{ty}` is not i32")]
    IncompatibleReturn { function: String, ty: String },
    #[error("function `{0}`: malformed declaration")]
    Malformed(String),
}

/// Extracts the `#[no_mangle] pub extern "C" fn` declarations of a wrapper.
pub fn validate_wrapper(source: &str) -> Result<Vec<FfiSignature>, ValidationError> {
    let toks = tokenize(source);
    let mut sigs = Vec::new();
    let mut seen = BTreeSet::new();
    let mut i = 0;
    while i < toks.len() {
        let Some(attr_end) = no_mangle_attr(&toks, i) else {
            i += 1;
            continue;
        };
        let mut j = skip_attributes(&toks, attr_end);
        // pub [unsafe] extern "C" fn
        let mut header = Vec::new();
        while j < toks.len() && !toks[j].is_ident("fn") && header.len() < 6 {
            header.push(&toks[j]);
            j += 1;
        }
        let is_c_abi =
            header.iter().any(|t| t.is_ident("extern")) && header.iter().any(|t| t.kind == TokenKind::Str("C".into()));
        let Some(name) = toks.get(j + 1).and_then(Token::ident).filter(|_| is_c_abi && j < toks.len()) else {
            i = attr_end;
            continue;
        };
        let name = name.to_string();
        let (sig, next) = parse_signature(&toks, j + 2, &name)?;
        if !seen.insert(name.clone()) {
            return Err(ValidationError::Duplicate(name));
        }
        sigs.push(sig);
        i = next;
    }
    if sigs.is_empty() {
        return Err(ValidationError::NoExportedFunctions);
    }
    Ok(sigs)
}

/// `#[no_mangle]` or `#[unsafe(no_mangle)]` starting at `i`; returns the index
/// after the closing bracket.
fn no_mangle_attr(toks: &[Token], i: usize) -> Option<usize> {
    if !(toks[i].is_punct('#') && toks.get(i + 1)?.is_punct('[')) {
        return None;
    }
    let close = i + 2 + toks[i + 2..].iter().position(|t| t.is_punct(']'))?;
    let inner: Vec<&str> = toks[i + 2..close].iter().filter_map(Token::ident).collect();
    (inner == ["no_mangle"] || inner == ["unsafe", "no_mangle"]).then_some(close + 1)
}

fn skip_attributes(toks: &[Token], mut j: usize) -> usize {
    while j + 1 < toks.len() && toks[j].is_punct('#') && toks[j + 1].is_punct('[') {
        match toks[j..].iter().position(|t| t.is_punct(']')) {
            Some(p) => j += p + 1,
            None => return toks.len(),
        }
    }
    j
}

fn parse_signature(toks: &[Token], at: usize, name: &str) -> Result<(FfiSignature, usize), ValidationError> {
    let malformed = || ValidationError::Malformed(name.to_string());
    if !toks.get(at).is_some_and(|t| t.is_punct('(')) {
        return Err(malformed());
    }
    let mut depth = 0;
    let mut close = None;
    for (k, t) in toks.iter().enumerate().skip(at) {
        if t.is_punct('(') {
            depth += 1;
        } else if t.is_punct(')') {
            depth -= 1;
            if depth == 0 {
                close = Some(k);
                break;
            }
        }
    }
    let close = close.ok_or_else(malformed)?;
    let mut params = Vec::new();
    for group in toks[at + 1..close].split(|t| t.is_punct(',')) {
        if group.is_empty() {
            continue;
        }
        let colon = group.iter().position(|t| t.is_punct(':')).ok_or_else(malformed)?;
        let pname = group[..colon].iter().filter_map(Token::ident).rfind(|n| *n != "mut");
        let pname = pname.ok_or_else(malformed)?.to_string();
        let ty = render_type(&group[colon + 1..]);
        let kind = ParamKind::from_rust(&ty).ok_or_else(|| ValidationError::IncompatibleParam {
            function: name.to_string(),
            param: pname.clone(),
            ty: ty.clone(),
        })?;
        params.push(FfiParam { name: pname, kind });
    }
    // -> i32 {
    let body =
        toks[close + 1..].iter().position(|t| t.is_punct('{') || t.is_punct(';')).map_or(toks.len(), |p| close + 1 + p);
    let ret = &toks[close + 1..body];
    let ret_ty = if ret.len() >= 2 && ret[0].is_punct('-') && ret[1].is_punct('>') {
        render_type(&ret[2..])
    } else {
        "()".to_string()
    };
    if ret_ty != "i32" {
        return Err(ValidationError::IncompatibleReturn { function: name.to_string(), ty: ret_ty });
    }
    Ok((FfiSignature { name: name.to_string(), params }, body))
}

fn render_type(toks: &[Token]) -> String {
    let mut out = String::new();
    for t in toks {
        match &t.kind {
            TokenKind::Ident(s) | TokenKind::Number(s) => {
                if out.ends_with(|c: char| c.is_alphanumeric() || c == '_') {
                    out.push(' ');
                }
                out.push_str(s);
            }
            TokenKind::Punct(c) => out.push(*c),
            TokenKind::Str(s) => out.push_str(s),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrapperOrigin {
    Generated,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrapperArtifact {
    pub source_text: String,
    pub exported_functions: Vec<FfiSignature>,
    pub origin: WrapperOrigin,
    /// Generation attempts consumed: the initial request plus repairs.
    pub attempts_used: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CompileOutcome {
    Success {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bitcode_path: Option<String>,
    },
    Failure {
        diagnostic: String,
    },
}

impl CompileOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, CompileOutcome::Success { .. })
    }

    pub fn diagnostic(&self) -> Option<&str> {
        match self {
            CompileOutcome::Failure { diagnostic } => Some(diagnostic),
            CompileOutcome::Success { .. } => None,
        }
    }
}

/// The compile check used when no toolchain is configured: the source must
/// have balanced delimiters and validate as a wrapper. No bitcode results.
pub fn compile_offline(source: &str) -> CompileOutcome {
    if let Err(diagnostic) = check_delimiters(source) {
        return CompileOutcome::Failure { diagnostic };
    }
    match validate_wrapper(source) {
        Ok(_) => CompileOutcome::Success { bitcode_path: None },
        Err(e) => CompileOutcome::Failure { diagnostic: alloc::format!("error: {e}") },
    }
}

fn check_delimiters(source: &str) -> Result<(), String> {
    let mut stack = Vec::new();
    for t in tokenize(source) {
        let TokenKind::Punct(c) = t.kind else { continue };
        match c {
            '(' | '[' | '{' => stack.push((c, t.line)),
            ')' | ']' | '}' => {
                let want = match c {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                match stack.pop() {
                    Some((open, _)) if open == want => {}
                    _ => return Err(alloc::format!("error: unexpected closing delimiter `{c}` at line {}", t.line)),
                }
            }
            _ => {}
        }
    }
    match stack.pop() {
        Some((c, line)) => Err(alloc::format!("error: unclosed delimiter `{c}` opened at line {line}")),
        None => Ok(()),
    }
}

/// CWE categories with a dedicated fallback template.
pub const TEMPLATE_CWES: [u32; 11] = [119, 125, 131, 134, 190, 191, 415, 416, 787, 824, 908];

const BUILTIN: [(Option<u32>, &str); 12] = [
    (Some(119), include_str!("../templates/cwe-119.rs")),
    (Some(125), include_str!("../templates/cwe-125.rs")),
    (Some(131), include_str!("../templates/cwe-131.rs")),
    (Some(134), include_str!("../templates/cwe-134.rs")),
    (Some(190), include_str!("../templates/cwe-190.rs")),
    (Some(191), include_str!("../templates/cwe-191.rs")),
    (Some(415), include_str!("../templates/cwe-415.rs")),
    (Some(416), include_str!("../templates/cwe-416.rs")),
    (Some(787), include_str!("../templates/cwe-787.rs")),
    (Some(824), include_str!("../templates/cwe-824.rs")),
    (Some(908), include_str!("../templates/cwe-908.rs")),
    (None, include_str!("../templates/generic.rs")),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateEntry {
    /// `None` for the generic memory-safety template.
    pub cwe_id: Option<u32>,
    pub function_names: Vec<String>,
    pub source_text: String,
    signatures: Vec<FfiSignature>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("template for {which}: {source}")]
pub struct TemplateError {
    pub which: String,
    #[source]
    pub source: ValidationError,
}

/// Fallback wrappers keyed by CWE, with a generic entry for everything else.
#[derive(Debug, Clone)]
pub struct TemplateLibrary {
    by_cwe: BTreeMap<u32, TemplateEntry>,
    generic: TemplateEntry,
}

impl TemplateLibrary {
    pub fn builtin() -> Self {
        let mut by_cwe = BTreeMap::new();
        let mut generic = None;
        for (cwe, src) in BUILTIN {
            let entry = TemplateEntry::new(cwe, src.to_string()).expect("bundled template validates");
            match cwe {
                Some(c) => {
                    by_cwe.insert(c, entry);
                }
                None => generic = Some(entry),
            }
        }
        TemplateLibrary { by_cwe, generic: generic.expect("generic template bundled") }
    }

    /// Replaces or adds a template; the source must validate.
    pub fn insert(&mut self, cwe_id: Option<u32>, source: String) -> Result<(), TemplateError> {
        let entry = TemplateEntry::new(cwe_id, source)?;
        match cwe_id {
            Some(c) => {
                self.by_cwe.insert(c, entry);
            }
            None => self.generic = entry,
        }
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = &TemplateEntry> {
        self.by_cwe.values().chain(core::iter::once(&self.generic))
    }

    pub fn get(&self, cwe_id: u32) -> &TemplateEntry {
        self.by_cwe.get(&cwe_id).unwrap_or(&self.generic)
    }

    /// The template for `cwe_id` as a fallback artifact.
    pub fn fallback_wrapper(&self, cwe_id: u32, attempts_used: u32) -> WrapperArtifact {
        let entry = self.get(cwe_id);
        WrapperArtifact {
            source_text: entry.source_text.clone(),
            exported_functions: entry.signatures.clone(),
            origin: WrapperOrigin::Fallback,
            attempts_used,
        }
    }
}

impl Default for TemplateLibrary {
    fn default() -> Self {
        TemplateLibrary::builtin()
    }
}

impl TemplateEntry {
    fn new(cwe_id: Option<u32>, source_text: String) -> Result<Self, TemplateError> {
        let signatures = validate_wrapper(&source_text).map_err(|source| TemplateError {
            which: cwe_id.map_or_else(|| "generic".to_string(), |c| alloc::format!("CWE-{c}")),
            source,
        })?;
        Ok(TemplateEntry {
            cwe_id,
            function_names: signatures.iter().map(|s| s.name.clone()).collect(),
            source_text,
            signatures,
        })
    }

    pub fn signatures(&self) -> &[FfiSignature] {
        &self.signatures
    }
}

/// Builtin fallback for `cwe_id`, with one attempt recorded.
pub fn fallback_wrapper(cwe_id: u32) -> WrapperArtifact {
    TemplateLibrary::builtin().fallback_wrapper(cwe_id, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use ParamKind::*;

    pub(crate) const THREE_FN_WRAPPER: &str = include_str!("../testdata/three_fn_wrapper.rs");

    #[test]
    fn three_fn_wrapper_signatures() {
        let sigs = validate_wrapper(THREE_FN_WRAPPER).unwrap();
        assert_eq!(
            sigs,
            vec![
                FfiSignature::new(
                    "buffer_overflow_write",
                    &[("buffer", BytePointer), ("offset", Size), ("value", Byte)]
                ),
                FfiSignature::new("use_after_free_access", &[("ptr", BytePointer), ("size", Size)]),
                FfiSignature::new("integer_overflow_allocation", &[("base_size", Size), ("multiplier", Size)]),
            ]
        );
    }

    #[test]
    fn empty_source() {
        assert_eq!(validate_wrapper(""), Err(ValidationError::NoExportedFunctions));
        assert_eq!(validate_wrapper("fn").unwrap_err().to_string(), "no exported functions");
    }

    #[test]
    fn float_parameter_names_offender() {
        let src = "#[no_mangle]\npub extern \"C\" fn scale(buffer: *mut u8, factor: f64) -> i32 { 0 }";
        let err = validate_wrapper(src).unwrap_err();
        assert_eq!(
            err,
            ValidationError::IncompatibleParam { function: "scale".into(), param: "factor".into(), ty: "f64".into() }
        );
        assert!(err.to_string().contains("scale"));
    }

    #[test]
    fn duplicates_and_returns() {
        let one = "#[no_mangle]\npub extern \"C\" fn f() -> i32 { 0 }\n";
        let dup = alloc::format!("{one}{one}");
        assert_eq!(validate_wrapper(&dup), Err(ValidationError::Duplicate("f".into())));
        let unit = "#[no_mangle]\npub extern \"C\" fn g(x: usize) { }";
        assert!(matches!(validate_wrapper(unit), Err(ValidationError::IncompatibleReturn { .. })));
    }

    #[test]
    fn ignores_mangled_and_rust_abi() {
        let src = "pub extern \"C\" fn hidden() -> i32 { 0 }\n#[no_mangle]\npub fn rusty() -> i32 { 0 }\n#[unsafe(no_mangle)]\npub unsafe extern \"C\" fn seen(p: *const u8, n: i32) -> i32 { 0 }";
        let sigs = validate_wrapper(src).unwrap();
        assert_eq!(sigs, vec![FfiSignature::new("seen", &[("p", BytePointer), ("n", Int32)])]);
    }

    #[test]
    fn every_bundled_template_validates() {
        let lib = TemplateLibrary::builtin();
        assert_eq!(lib.entries().count(), 12);
        for entry in lib.entries() {
            let sigs = validate_wrapper(&entry.source_text).unwrap();
            assert_eq!(sigs.len(), 4, "{:?}", entry.cwe_id);
            assert_eq!(compile_offline(&entry.source_text), CompileOutcome::Success { bitcode_path: None });
        }
        for cwe in TEMPLATE_CWES {
            let w = fallback_wrapper(cwe);
            assert_eq!(w.origin, WrapperOrigin::Fallback);
            assert!(validate_wrapper(&w.source_text).is_ok());
            assert_eq!(lib.get(cwe).cwe_id, Some(cwe));
        }
    }

    #[test]
    fn template_lookup() {
        let names = |cwe| fallback_wrapper(cwe).exported_functions.into_iter().map(|s| s.name).collect::<Vec<_>>();
        let n131 = names(131);
        for f in ["buffer_overflow_write", "use_after_free_access", "integer_overflow_allocation"] {
            assert!(n131.iter().any(|n| n == f), "{f}");
        }
        assert!(names(415).iter().any(|n| n == "double_free_trigger"));
        let generic = fallback_wrapper(999_999);
        assert!(!generic.exported_functions.is_empty());
        assert_eq!(TemplateLibrary::builtin().get(999_999).cwe_id, None);
    }

    #[test]
    fn offline_compile() {
        assert!(compile_offline(THREE_FN_WRAPPER).is_success());
        let bad = compile_offline("fn");
        assert!(!bad.diagnostic().unwrap().is_empty());
        let unbalanced = compile_offline("#[no_mangle]\npub extern \"C\" fn f() -> i32 { 0 ");
        assert!(unbalanced.diagnostic().unwrap().contains("unclosed"));
    }

    #[test]
    fn override_must_validate() {
        let mut lib = TemplateLibrary::builtin();
        assert!(lib.insert(Some(131), "fn nothing() {}".into()).is_err());
        lib.insert(Some(131), "#[no_mangle]\npub extern \"C\" fn only(n: usize) -> i32 { 0 }".into()).unwrap();
        assert_eq!(lib.get(131).function_names, vec!["only"]);
    }
}
