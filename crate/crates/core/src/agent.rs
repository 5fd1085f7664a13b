//! The four agent stages and their JSON contracts.
//!
//! Each stage builds a request document, sends it to an [`AgentBackend`]
//! under its [`Role`], and validates the response into a typed value.
//! Out-of-range numbers are clamped with a warning rather than rejected. A
//! response that does not fit the schema at all is re-requested once with the
//! problem attached under `schema_error`; codegen instead feeds compiler
//! diagnostics back through the repair loop.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::klee::{KleeParams, SearchStrategy};
use crate::lex::tokenize;
use crate::snippet::{profile_missing_context, CveSnippet};
use crate::wrapper::{validate_wrapper, CompileOutcome, TemplateLibrary, WrapperArtifact, WrapperOrigin};

/// Repair requests allowed after the initial codegen attempt.
pub const MAX_REPAIRS: u32 = 2;
/// Diagnostics longer than this are cut before being sent back.
pub const DIAGNOSTIC_LIMIT: usize = 64 * 1024;

pub const FUNCTION_COUNT_RANGE: (i64, i64) = (1, 16);

/// CWE ids the oracle may report without an "unknown" warning.
pub const RECOGNIZED_CWES: [u32; 27] = [
    20, 119, 120, 122, 125, 131, 134, 190, 191, 362, 400, 401, 415, 416, 476, 617, 662, 672, 704, 758, 770, 787, 822,
    824, 825, 843, 908,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Oracle,
    Safety,
    Codegen,
    Filter,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Oracle, Role::Safety, Role::Codegen, Role::Filter];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Oracle => "oracle",
            Role::Safety => "safety",
            Role::Codegen => "codegen",
            Role::Filter => "filter",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct BackendError(pub String);

/// Answers agent requests. `respond` maps a role and a request document to
/// the role's response document.
pub trait AgentBackend {
    fn respond(&self, role: Role, request: &Value) -> Result<Value, BackendError>;

    /// Backends that cannot take concurrent requests return true; the
    /// orchestrator then processes files one at a time.
    fn serial_only(&self) -> bool {
        false
    }
}

impl<B: AgentBackend + ?Sized> AgentBackend for &B {
    fn respond(&self, role: Role, request: &Value) -> Result<Value, BackendError> {
        (**self).respond(role, request)
    }
    fn serial_only(&self) -> bool {
        (**self).serial_only()
    }
}

impl<B: AgentBackend + ?Sized> AgentBackend for Box<B> {
    fn respond(&self, role: Role, request: &Value) -> Result<Value, BackendError> {
        (**self).respond(role, request)
    }
    fn serial_only(&self) -> bool {
        (**self).serial_only()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StageError {
    #[error("{role} backend failure: {source}")]
    Backend { role: Role, source: BackendError },
    #[error("{role} response rejected after re-request: {message}")]
    Schema { role: Role, message: String },
    #[error("{0} returned an empty response")]
    EmptyResponse(Role),
}

impl StageError {
    pub fn role(&self) -> Role {
        match self {
            StageError::Backend { role, .. } | StageError::Schema { role, .. } => *role,
            StageError::EmptyResponse(role) => *role,
        }
    }
}

/// A stage result with the warnings raised while validating it.
#[derive(Debug, Clone, PartialEq)]
pub struct Staged<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Complexity {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisPlan {
    pub vulnerability_types: Vec<u32>,
    pub complexity: Complexity,
    pub recommended_function_count: u8,
}

impl AnalysisPlan {
    pub fn primary_cwe(&self) -> u32 {
        self.vulnerability_types[0]
    }

    pub fn unknown_types(&self) -> impl Iterator<Item = u32> + '_ {
        self.vulnerability_types.iter().copied().filter(|c| !RECOGNIZED_CWES.contains(c))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskPattern {
    pub name: String,
    pub cwe_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskAssessment {
    pub patterns: Vec<RiskPattern>,
    pub risk_score: f64,
    pub critical_lines: Vec<usize>,
}

fn snippet_payload(snippet: &CveSnippet) -> Value {
    json!({
        "cve_id": snippet.cve_id.as_str(),
        "cwe_id": snippet.cwe_id,
        "line_count": snippet.line_count,
        "source": snippet.source_text,
        "missing_context": profile_missing_context(snippet),
    })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("stage values serialize")
}

/// Sends `request`, validating with `parse`; one re-request on schema failure.
fn request_validated<T>(
    backend: &dyn AgentBackend,
    role: Role,
    mut request: Value,
    parse: impl Fn(&Value, &mut Vec<String>) -> Result<T, String>,
) -> Result<Staged<T>, StageError> {
    let mut last = String::new();
    let mut empty = false;
    for attempt in 0..2 {
        if attempt == 1 {
            request["schema_error"] = Value::String(last.clone());
        }
        let response = backend.respond(role, &request).map_err(|source| StageError::Backend { role, source })?;
        empty = is_empty_response(&response);
        let mut warnings = Vec::new();
        if attempt == 1 {
            warnings.push(format!("{role}: response re-requested after schema error: {last}"));
        }
        match parse(&response, &mut warnings) {
            Ok(value) => return Ok(Staged { value, warnings }),
            Err(msg) => last = msg,
        }
    }
    if empty {
        Err(StageError::EmptyResponse(role))
    } else {
        Err(StageError::Schema { role, message: last })
    }
}

fn is_empty_response(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::Object(m) => m.is_empty(),
        Value::String(s) => s.trim().is_empty(),
        _ => false,
    }
}

fn as_object(v: &Value) -> Result<&Map<String, Value>, String> {
    v.as_object().ok_or_else(|| String::from("expected a JSON object"))
}

fn int_field(obj: &Map<String, Value>, key: &str) -> Result<Option<i64>, String> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => {
            if let Some(i) = v.as_i64() {
                Ok(Some(i))
            } else if v.as_u64().is_some() {
                Ok(Some(i64::MAX))
            } else {
                Err(format!("`{key}` must be an integer"))
            }
        }
    }
}

fn clamp_i64(v: i64, lo: i64, hi: i64, key: &str, warnings: &mut Vec<String>) -> i64 {
    let c = v.clamp(lo, hi);
    if c != v {
        warnings.push(format!("`{key}` = {v} out of range [{lo}, {hi}], clamped to {c}"));
    }
    c
}

pub fn oracle_request(snippet: &CveSnippet) -> Value {
    json!({ "role": "oracle", "snippet": snippet_payload(snippet) })
}

pub fn plan_analysis(snippet: &CveSnippet, backend: &dyn AgentBackend) -> Result<Staged<AnalysisPlan>, StageError> {
    request_validated(backend, Role::Oracle, oracle_request(snippet), |resp, warnings| {
        parse_plan(resp, snippet.cwe_id, warnings)
    })
}

fn parse_plan(resp: &Value, metadata_cwe: u32, warnings: &mut Vec<String>) -> Result<AnalysisPlan, String> {
    let obj = as_object(resp)?;
    let mut types = Vec::new();
    match obj.get("vulnerability_types") {
        None | Some(Value::Null) => {}
        Some(Value::Array(items)) => {
            for item in items {
                let id = item
                    .as_u64()
                    .filter(|&c| c > 0 && c <= u32::MAX as u64)
                    .ok_or("`vulnerability_types` must hold positive integers")?;
                if !types.contains(&(id as u32)) {
                    types.push(id as u32);
                }
            }
        }
        Some(_) => return Err("`vulnerability_types` must be an array".into()),
    }
    if types.is_empty() {
        warnings.push(format!("oracle: no vulnerability types, using metadata CWE-{metadata_cwe}"));
        types.push(metadata_cwe);
    }
    let complexity = match obj.get("complexity").or_else(|| obj.get("complexity_estimate")) {
        None | Some(Value::Null) => {
            warnings.push("oracle: complexity missing, assuming medium".into());
            Complexity::Medium
        }
        Some(Value::String(s)) => match s.to_ascii_lowercase().as_str() {
            "low" => Complexity::Low,
            "medium" => Complexity::Medium,
            "high" => Complexity::High,
            other => return Err(format!("unknown complexity {other:?}")),
        },
        Some(_) => return Err("`complexity` must be a string".into()),
    };
    let count = match int_field(obj, "recommended_function_count")? {
        Some(n) => clamp_i64(n, FUNCTION_COUNT_RANGE.0, FUNCTION_COUNT_RANGE.1, "recommended_function_count", warnings),
        None => {
            warnings.push("oracle: recommended_function_count missing, using 10".into());
            10
        }
    };
    let plan = AnalysisPlan { vulnerability_types: types, complexity, recommended_function_count: count as u8 };
    for unknown in plan.unknown_types() {
        warnings.push(format!("oracle: CWE-{unknown} is not a recognized id; flagged unknown"));
    }
    Ok(plan)
}

pub fn safety_request(snippet: &CveSnippet, plan: &AnalysisPlan) -> Value {
    json!({ "role": "safety", "snippet": snippet_payload(snippet), "plan": to_value(plan) })
}

pub fn assess_safety(
    snippet: &CveSnippet,
    plan: &AnalysisPlan,
    backend: &dyn AgentBackend,
) -> Result<Staged<RiskAssessment>, StageError> {
    request_validated(backend, Role::Safety, safety_request(snippet, plan), |resp, warnings| {
        parse_risk(resp, plan, snippet.line_count, warnings)
    })
}

fn parse_risk(
    resp: &Value,
    plan: &AnalysisPlan,
    line_count: usize,
    warnings: &mut Vec<String>,
) -> Result<RiskAssessment, String> {
    if is_empty_response(resp) {
        return Err("empty response".into());
    }
    let obj = as_object(resp)?;
    let raw = obj.get("risk_score").and_then(Value::as_f64).ok_or("`risk_score` must be a number")?;
    let risk_score = raw.clamp(0.0, 10.0);
    if risk_score != raw {
        warnings.push(format!("safety: risk_score {raw} clamped to {risk_score}"));
    }
    let mut patterns = Vec::new();
    if let Some(items) = obj.get("patterns").filter(|v| !v.is_null()) {
        let items = items.as_array().ok_or("`patterns` must be an array")?;
        for item in items {
            let name = item.get("name").and_then(Value::as_str).ok_or("pattern needs a string `name`")?;
            let cwe = item.get("cwe_id").and_then(Value::as_u64).ok_or("pattern needs an integer `cwe_id`")?;
            if plan.vulnerability_types.iter().any(|&c| c as u64 == cwe) {
                patterns.push(RiskPattern { name: name.to_string(), cwe_id: cwe as u32 });
            } else {
                warnings.push(format!("safety: dropped pattern {name:?} for CWE-{cwe} outside the plan"));
            }
        }
    }
    let mut critical_lines = BTreeSet::new();
    if let Some(items) = obj.get("critical_lines").filter(|v| !v.is_null()) {
        let items = items.as_array().ok_or("`critical_lines` must be an array")?;
        for item in items {
            let line = item.as_i64().ok_or("`critical_lines` must hold integers")?;
            if line >= 1 && (line as u64) <= line_count as u64 {
                critical_lines.insert(line as usize);
            } else {
                warnings.push(format!("safety: critical line {line} outside 1..={line_count} dropped"));
            }
        }
    }
    Ok(RiskAssessment { patterns, risk_score, critical_lines: critical_lines.into_iter().collect() })
}

/// What the codegen stage produced, including the compile outcome of the
/// returned artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct WrapperOutcome {
    pub artifact: WrapperArtifact,
    pub compile: CompileOutcome,
    pub repair_requests: u32,
    /// Diagnostics of every failed attempt, in order.
    pub diagnostics: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn codegen_request(
    snippet: &CveSnippet,
    plan: &AnalysisPlan,
    risk: &RiskAssessment,
    attempt: u32,
    previous: Option<(&str, &str)>,
) -> Value {
    let mut req = json!({
        "role": "codegen",
        "snippet": snippet_payload(snippet),
        "plan": to_value(plan),
        "risk": to_value(risk),
        "attempt": attempt,
    });
    if let Some((source, diagnostic)) = previous {
        req["previous_source"] = Value::String(source.to_string());
        req["compiler_diagnostic"] = Value::String(diagnostic.to_string());
    }
    req
}

fn truncate_diagnostic(mut d: String) -> String {
    if d.len() > DIAGNOSTIC_LIMIT {
        let mut cut = DIAGNOSTIC_LIMIT;
        while !d.is_char_boundary(cut) {
            cut -= 1;
        }
        d.truncate(cut);
    }
    d
}

/// Requests a wrapper, validates and compiles it, and feeds failures back
/// for at most [`MAX_REPAIRS`] repairs. After the last failure the plan's
/// primary CWE template is used instead.
pub fn generate_wrapper(
    snippet: &CveSnippet,
    plan: &AnalysisPlan,
    risk: &RiskAssessment,
    backend: &dyn AgentBackend,
    templates: &TemplateLibrary,
    compile: &mut dyn FnMut(&WrapperArtifact) -> CompileOutcome,
) -> Result<WrapperOutcome, StageError> {
    let mut diagnostics: Vec<String> = Vec::new();
    let mut warnings = Vec::new();
    let mut previous_source = String::new();
    let max_attempts = MAX_REPAIRS + 1;
    for attempt in 1..=max_attempts {
        let previous = diagnostics.last().map(|d| (previous_source.as_str(), d.as_str()));
        let request = codegen_request(snippet, plan, risk, attempt, previous);
        let response = backend
            .respond(Role::Codegen, &request)
            .map_err(|source| StageError::Backend { role: Role::Codegen, source })?;
        let Some(source) = response.get("wrapper_source").and_then(Value::as_str) else {
            previous_source.clear();
            diagnostics.push(String::from("error: codegen response lacks a string `wrapper_source`"));
            continue;
        };
        previous_source = source.to_string();
        let signatures = match validate_wrapper(source) {
            Ok(s) => s,
            Err(e) => {
                diagnostics.push(format!("error: {e}"));
                continue;
            }
        };
        if signatures.len() > FUNCTION_COUNT_RANGE.1 as usize {
            diagnostics.push(format!(
                "error: {} exported functions exceed the limit of {}",
                signatures.len(),
                FUNCTION_COUNT_RANGE.1
            ));
            continue;
        }
        let artifact = WrapperArtifact {
            source_text: source.to_string(),
            exported_functions: signatures,
            origin: WrapperOrigin::Generated,
            attempts_used: attempt,
        };
        match compile(&artifact) {
            outcome @ CompileOutcome::Success { .. } => {
                return Ok(WrapperOutcome {
                    artifact,
                    compile: outcome,
                    repair_requests: attempt - 1,
                    diagnostics,
                    warnings,
                })
            }
            CompileOutcome::Failure { diagnostic } => diagnostics.push(truncate_diagnostic(diagnostic)),
        }
    }
    let cwe = plan.primary_cwe();
    warnings.push(format!("codegen: {max_attempts} attempts failed, using the CWE-{cwe} fallback template"));
    let artifact = templates.fallback_wrapper(cwe, max_attempts);
    let compile = compile(&artifact);
    Ok(WrapperOutcome { artifact, compile, repair_requests: MAX_REPAIRS, diagnostics, warnings })
}

pub fn filter_request(risk: &RiskAssessment, plan: &AnalysisPlan) -> Value {
    json!({ "role": "filter", "risk": to_value(risk), "plan": to_value(plan) })
}

/// Asks the filter for executor parameters. Never fails: on any error the
/// documented defaults are returned with a warning.
pub fn select_params(risk: &RiskAssessment, plan: &AnalysisPlan, backend: &dyn AgentBackend) -> Staged<KleeParams> {
    match request_validated(backend, Role::Filter, filter_request(risk, plan), parse_params) {
        Ok(staged) => staged,
        Err(e) => {
            Staged { value: KleeParams::default(), warnings: alloc::vec![format!("{e}; using default parameters")] }
        }
    }
}

fn parse_params(resp: &Value, warnings: &mut Vec<String>) -> Result<KleeParams, String> {
    let obj = as_object(resp)?;
    let defaults = KleeParams::default();
    let search_strategy = match obj.get("search_strategy") {
        None | Some(Value::Null) => {
            warnings.push("filter: search_strategy missing, using dfs".into());
            defaults.search_strategy
        }
        Some(Value::String(s)) => SearchStrategy::parse(s).ok_or_else(|| format!("unknown search strategy {s:?}"))?,
        Some(_) => return Err("`search_strategy` must be a string".into()),
    };
    let mut limit = |key: &str, default: u32| -> Result<u32, String> {
        match int_field(obj, key)? {
            Some(v) => Ok(clamp_i64(v, 1, u32::MAX as i64, key, warnings) as u32),
            None => {
                warnings.push(format!("filter: `{key}` missing, using {default}"));
                Ok(default)
            }
        }
    };
    Ok(KleeParams {
        search_strategy,
        time_limit_s: limit("time_limit_s", defaults.time_limit_s)?,
        memory_limit_mb: limit("memory_limit_mb", defaults.memory_limit_mb)?,
        max_fork_depth: limit("max_fork_depth", defaults.max_fork_depth)?,
    })
}

/// API names whose presence raises the rule-based risk score.
pub const UNSAFE_API_KEYWORDS: [&str; 6] =
    ["from_raw_parts", "dealloc", "drop_in_place", "add", "get_unchecked", "transmute"];

/// Deterministic offline backend.
///
/// * oracle: echoes the metadata CWE; complexity is high with more than one
///   `unsafe`, medium with exactly one, low otherwise; function count is
///   8, or 12 when complexity is high.
/// * safety: risk = min(10, 2 + 2 * keyword hits) over
///   [`UNSAFE_API_KEYWORDS`]; one pattern per distinct keyword; critical
///   lines are the lines holding a keyword.
/// * codegen: the fallback template of the plan's primary CWE.
/// * filter: risk < 4 → dfs/30 s/512 MB/32; 4..=7 → random-path/60/1024/64;
///   above 7 → random-path/120/2048/128.
#[derive(Debug, Clone, Default)]
pub struct RuleBackend {
    templates: TemplateLibrary,
}

impl RuleBackend {
    pub fn new(templates: TemplateLibrary) -> Self {
        RuleBackend { templates }
    }

    pub fn params_for_risk(risk: f64) -> KleeParams {
        let (search_strategy, time_limit_s, memory_limit_mb, max_fork_depth) = if risk < 4.0 {
            (SearchStrategy::Dfs, 30, 512, 32)
        } else if risk <= 7.0 {
            (SearchStrategy::RandomPath, 60, 1024, 64)
        } else {
            (SearchStrategy::RandomPath, 120, 2048, 128)
        };
        KleeParams { search_strategy, time_limit_s, memory_limit_mb, max_fork_depth }
    }
}

fn bad_request(role: Role, what: &str) -> BackendError {
    BackendError(format!("rule backend: {role} request lacks {what}"))
}

impl AgentBackend for RuleBackend {
    fn respond(&self, role: Role, request: &Value) -> Result<Value, BackendError> {
        let source = || {
            request
                .pointer("/snippet/source")
                .and_then(Value::as_str)
                .ok_or_else(|| bad_request(role, "snippet.source"))
        };
        match role {
            Role::Oracle => {
                let cwe = request
                    .pointer("/snippet/cwe_id")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| bad_request(role, "snippet.cwe_id"))?;
                let unsafe_count = tokenize(source()?).iter().filter(|t| t.is_ident("unsafe")).count();
                let complexity = match unsafe_count {
                    0 => "low",
                    1 => "medium",
                    _ => "high",
                };
                let count = if complexity == "high" { 12 } else { 8 };
                Ok(json!({
                    "vulnerability_types": [cwe],
                    "complexity": complexity,
                    "recommended_function_count": count,
                }))
            }
            Role::Safety => {
                let plan_cwe = request
                    .pointer("/plan/vulnerability_types/0")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| bad_request(role, "plan.vulnerability_types"))?;
                let mut hits = 0u32;
                let mut found = BTreeSet::new();
                let mut lines = BTreeSet::new();
                for t in tokenize(source()?) {
                    if let Some(kw) = t.ident().and_then(|n| UNSAFE_API_KEYWORDS.iter().find(|k| **k == n)) {
                        hits += 1;
                        found.insert(*kw);
                        lines.insert(t.line);
                    }
                }
                let risk = (2 + 2 * hits).min(10);
                let patterns: Vec<Value> =
                    found.into_iter().map(|kw| json!({ "name": kw, "cwe_id": plan_cwe })).collect();
                Ok(json!({
                    "patterns": patterns,
                    "risk_score": risk,
                    "critical_lines": lines.into_iter().collect::<Vec<_>>(),
                }))
            }
            Role::Codegen => {
                let cwe = request
                    .pointer("/plan/vulnerability_types/0")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| bad_request(role, "plan.vulnerability_types"))?;
                let entry = self.templates.get(cwe as u32);
                Ok(json!({ "wrapper_source": entry.source_text }))
            }
            Role::Filter => {
                let risk = request
                    .pointer("/risk/risk_score")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| bad_request(role, "risk.risk_score"))?;
                Ok(to_value(&RuleBackend::params_for_risk(risk)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snippet::Identity;
    use crate::wrapper::compile_offline;
    use alloc::vec;
    use core::cell::RefCell;

    const LISTING_ONE: &str = include_str!("../testdata/cwe-131-cve-2020-35904.rs");

    fn listing_one() -> CveSnippet {
        CveSnippet::new(Identity::from_name("cwe-131-cve-2020-35904").unwrap(), LISTING_ONE.into(), "l1").unwrap()
    }

    fn snippet_with(cwe: u32, text: &str) -> CveSnippet {
        let id = Identity::from_name(&format!("cwe-{cwe}-cve-2021-1000")).unwrap();
        CveSnippet::new(id, text.into(), "x").unwrap()
    }

    /// Replays queued responses per role and records every request.
    #[derive(Default)]
    struct Scripted {
        queue: RefCell<Vec<(Role, Result<Value, BackendError>)>>,
        seen: RefCell<Vec<(Role, Value)>>,
        fallback: Option<RuleBackend>,
    }

    impl Scripted {
        fn with_rules() -> Self {
            Scripted { fallback: Some(RuleBackend::default()), ..Default::default() }
        }
        fn push(&self, role: Role, v: Value) {
            self.queue.borrow_mut().push((role, Ok(v)));
        }
        fn fail(&self, role: Role) {
            self.queue.borrow_mut().push((role, Err(BackendError("connection reset".into()))));
        }
        fn requests(&self, role: Role) -> Vec<Value> {
            self.seen.borrow().iter().filter(|(r, _)| *r == role).map(|(_, v)| v.clone()).collect()
        }
    }

    impl AgentBackend for Scripted {
        fn respond(&self, role: Role, request: &Value) -> Result<Value, BackendError> {
            self.seen.borrow_mut().push((role, request.clone()));
            let mut q = self.queue.borrow_mut();
            if let Some(pos) = q.iter().position(|(r, _)| *r == role) {
                return q.remove(pos).1;
            }
            match &self.fallback {
                Some(rules) => rules.respond(role, request),
                None => Err(BackendError("script exhausted".into())),
            }
        }
    }

    #[test]
    fn rule_plan_for_listing_one() {
        let plan = plan_analysis(&listing_one(), &RuleBackend::default()).unwrap().value;
        assert_eq!(plan.vulnerability_types, vec![131]);
        assert_eq!(plan.complexity, Complexity::High);
        assert!((8..=12).contains(&plan.recommended_function_count));
    }

    #[test]
    fn rule_plan_echoes_metadata() {
        let plan = plan_analysis(&snippet_with(416, "fn f() {}"), &RuleBackend::default()).unwrap().value;
        assert_eq!(plan.vulnerability_types, vec![416]);
        assert_eq!(plan.complexity, Complexity::Low);
        assert_eq!(plan.recommended_function_count, 8);
    }

    #[test]
    fn function_count_clamped() {
        let b = Scripted::default();
        b.push(Role::Oracle, json!({"recommended_function_count": 40}));
        let staged = plan_analysis(&listing_one(), &b).unwrap();
        assert_eq!(staged.value.recommended_function_count, 16);
        assert_eq!(staged.value.vulnerability_types, vec![131]);
        assert!(staged.warnings.iter().any(|w| w.contains("clamped to 16")));
        b.push(
            Role::Oracle,
            json!({"vulnerability_types":[131], "complexity":"low", "recommended_function_count": -3}),
        );
        assert_eq!(plan_analysis(&listing_one(), &b).unwrap().value.recommended_function_count, 1);
    }

    #[test]
    fn unknown_cwe_flagged() {
        let b = Scripted::default();
        b.push(
            Role::Oracle,
            json!({"vulnerability_types":[99999], "complexity":"low", "recommended_function_count": 9}),
        );
        let staged = plan_analysis(&listing_one(), &b).unwrap();
        assert!(staged.warnings.iter().any(|w| w.contains("CWE-99999") && w.contains("unknown")));
    }

    #[test]
    fn schema_repair_then_fail() {
        let b = Scripted::default();
        b.push(Role::Oracle, json!("not an object"));
        b.push(
            Role::Oracle,
            json!({"vulnerability_types":[131], "complexity":"medium", "recommended_function_count": 9}),
        );
        let staged = plan_analysis(&listing_one(), &b).unwrap();
        assert_eq!(staged.value.recommended_function_count, 9);
        let reqs = b.requests(Role::Oracle);
        assert_eq!(reqs.len(), 2);
        assert!(reqs[1].get("schema_error").is_some());

        let b = Scripted::default();
        b.push(Role::Oracle, json!([1]));
        b.push(Role::Oracle, json!({"complexity": 3}));
        assert!(matches!(plan_analysis(&listing_one(), &b), Err(StageError::Schema { role: Role::Oracle, .. })));
    }

    #[test]
    fn backend_failure_surfaces() {
        let b = Scripted::default();
        b.fail(Role::Oracle);
        let err = plan_analysis(&listing_one(), &b).unwrap_err();
        assert_eq!(err.role(), Role::Oracle);
    }

    fn plan131() -> AnalysisPlan {
        AnalysisPlan { vulnerability_types: vec![131], complexity: Complexity::High, recommended_function_count: 12 }
    }

    #[test]
    fn risk_clamped_and_lines_filtered() {
        let snippet = snippet_with(131, &"x\n".repeat(16));
        assert_eq!(snippet.line_count, 16);
        let b = Scripted::default();
        b.push(
            Role::Safety,
            json!({"risk_score": 11.5, "critical_lines": [3, 999], "patterns": [
            {"name":"raw", "cwe_id":131}, {"name":"stray", "cwe_id":79}]}),
        );
        let staged = assess_safety(&snippet, &plan131(), &b).unwrap();
        assert_eq!(staged.value.risk_score, 10.0);
        assert_eq!(staged.value.critical_lines, vec![3]);
        assert_eq!(staged.value.patterns, vec![RiskPattern { name: "raw".into(), cwe_id: 131 }]);
        assert_eq!(staged.warnings.len(), 3);
        assert!(b.requests(Role::Safety)[0].get("plan").is_some());
    }

    #[test]
    fn empty_safety_response() {
        let b = Scripted::default();
        b.push(Role::Safety, json!({}));
        b.push(Role::Safety, Value::Null);
        assert_eq!(assess_safety(&listing_one(), &plan131(), &b).unwrap_err(), StageError::EmptyResponse(Role::Safety));
    }

    #[test]
    fn rule_risk_marks_from_raw_parts_line() {
        let snippet = listing_one();
        let risk = assess_safety(&snippet, &plan131(), &RuleBackend::default()).unwrap().value;
        let line = LISTING_ONE.lines().position(|l| l.contains("Vec::from_raw_parts")).unwrap() + 1;
        assert!(risk.critical_lines.contains(&line));
        // add, drop_in_place, from_raw_parts
        assert_eq!(risk.risk_score, 8.0);
        assert_eq!(risk.patterns.len(), 3);
    }

    fn risk(score: f64) -> RiskAssessment {
        RiskAssessment { patterns: vec![], risk_score: score, critical_lines: vec![] }
    }

    #[test]
    fn rule_params_monotone_in_risk() {
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        for pair in grid.windows(2) {
            let (a, b) = (RuleBackend::params_for_risk(pair[0]), RuleBackend::params_for_risk(pair[1]));
            assert!(b.time_limit_s >= a.time_limit_s);
            assert!(b.memory_limit_mb >= a.memory_limit_mb);
            assert!(b.max_fork_depth >= a.max_fork_depth);
        }
        let hi = select_params(&risk(9.0), &plan131(), &RuleBackend::default()).value;
        let lo = select_params(&risk(2.0), &plan131(), &RuleBackend::default()).value;
        assert!(hi.time_limit_s >= lo.time_limit_s);
        assert_eq!(
            lo,
            KleeParams {
                search_strategy: SearchStrategy::Dfs,
                time_limit_s: 30,
                memory_limit_mb: 512,
                max_fork_depth: 32
            }
        );
        assert_eq!(RuleBackend::params_for_risk(4.0).time_limit_s, 60);
        assert_eq!(RuleBackend::params_for_risk(7.0).time_limit_s, 60);
        assert_eq!(RuleBackend::params_for_risk(7.5).time_limit_s, 120);
    }

    #[test]
    fn params_default_on_failure() {
        let b = Scripted::default();
        b.fail(Role::Filter);
        let staged = select_params(&risk(5.0), &plan131(), &b);
        assert_eq!(staged.value, KleeParams::default());
        assert_eq!(staged.warnings.len(), 1);
    }

    #[test]
    fn params_parse_random_path() {
        let b = Scripted::default();
        b.push(
            Role::Filter,
            json!({"search_strategy":"random-path", "time_limit_s": 90, "memory_limit_mb": 0, "max_fork_depth": 10}),
        );
        let staged = select_params(&risk(5.0), &plan131(), &b);
        assert_eq!(staged.value.search_strategy, SearchStrategy::RandomPath);
        assert_eq!(staged.value.memory_limit_mb, 1);
        assert!(b.requests(Role::Filter)[0].get("risk").is_some());
    }

    fn never_compiles(_: &WrapperArtifact) -> CompileOutcome {
        CompileOutcome::Failure { diagnostic: "error[E0425]: cannot find value `x`".into() }
    }

    #[test]
    fn happy_path_one_attempt() {
        let b = RuleBackend::default();
        let mut compile = |a: &WrapperArtifact| compile_offline(&a.source_text);
        let out =
            generate_wrapper(&listing_one(), &plan131(), &risk(8.0), &b, &TemplateLibrary::builtin(), &mut compile)
                .unwrap();
        assert_eq!(out.artifact.origin, WrapperOrigin::Generated);
        assert_eq!(out.artifact.attempts_used, 1);
        assert_eq!(out.repair_requests, 0);
    }

    #[test]
    fn persistent_failure_falls_back_after_two_repairs() {
        let b = Scripted::with_rules();
        let mut calls = 0;
        let mut compile = |a: &WrapperArtifact| {
            calls += 1;
            if a.origin == WrapperOrigin::Fallback {
                compile_offline(&a.source_text)
            } else {
                never_compiles(a)
            }
        };
        let out =
            generate_wrapper(&listing_one(), &plan131(), &risk(8.0), &b, &TemplateLibrary::builtin(), &mut compile)
                .unwrap();
        assert_eq!(out.artifact.origin, WrapperOrigin::Fallback);
        assert_eq!(out.artifact.attempts_used, 3);
        assert_eq!(out.repair_requests, 2);
        assert_eq!(calls, 4);
        let reqs = b.requests(Role::Codegen);
        assert_eq!(reqs.len(), 3);
        assert!(reqs[0].get("compiler_diagnostic").is_none());
        let repairs: Vec<_> = reqs.iter().filter(|r| r.get("compiler_diagnostic").is_some()).collect();
        assert_eq!(repairs.len(), 2);
        assert_eq!(repairs[0]["compiler_diagnostic"], "error[E0425]: cannot find value `x`");
        assert!(reqs.iter().all(|r| r.get("plan").is_some() && r.get("risk").is_some()));
    }

    #[test]
    fn success_on_second_attempt() {
        let b = Scripted::with_rules();
        b.push(Role::Codegen, json!({"wrapper_source": "#[no_mangle]\npub extern \"C\" fn f(x: f64) -> i32 { 0 }"}));
        let mut compile = |a: &WrapperArtifact| compile_offline(&a.source_text);
        let out =
            generate_wrapper(&listing_one(), &plan131(), &risk(8.0), &b, &TemplateLibrary::builtin(), &mut compile)
                .unwrap();
        assert_eq!(out.artifact.origin, WrapperOrigin::Generated);
        assert_eq!(out.artifact.attempts_used, 2);
        assert!(out.diagnostics[0].contains("`x`"));
    }

    #[test]
    fn codegen_transport_error_is_terminal() {
        let b = Scripted::default();
        b.fail(Role::Codegen);
        let mut compile = |a: &WrapperArtifact| compile_offline(&a.source_text);
        let err =
            generate_wrapper(&listing_one(), &plan131(), &risk(8.0), &b, &TemplateLibrary::builtin(), &mut compile)
                .unwrap_err();
        assert_eq!(err.role(), Role::Codegen);
    }

    #[test]
    fn long_diagnostics_pass_through() {
        let b = Scripted::with_rules();
        let long = "e".repeat(10 * 1024);
        b.push(Role::Codegen, json!({"wrapper_source": "#[no_mangle]\npub extern \"C\" fn f() -> i32 { 0 }"}));
        let mut first = true;
        let mut compile = |a: &WrapperArtifact| {
            if core::mem::take(&mut first) {
                CompileOutcome::Failure { diagnostic: long.clone() }
            } else {
                compile_offline(&a.source_text)
            }
        };
        generate_wrapper(&listing_one(), &plan131(), &risk(8.0), &b, &TemplateLibrary::builtin(), &mut compile)
            .unwrap();
        assert_eq!(b.requests(Role::Codegen)[1]["compiler_diagnostic"].as_str().unwrap().len(), long.len());
    }
}
