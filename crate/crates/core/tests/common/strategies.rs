//! Generators and property checks shared by the property suite and the
//! acceptance target.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use snipsym_core::agent::{assess_safety, generate_wrapper, plan_analysis, select_params, RuleBackend};
use snipsym_core::errfile::{
    parse_error_file, render_error_file, summarize_criticality, ArgValue, FrameArg, KleeErrorRecord, StackFrame,
};
use snipsym_core::graph::{
    build_base_graph, build_graph, errors_by_cwe, export_jsonld, import_jsonld, shared_pattern_edges, top_cves,
    EdgeKind, FileResult, NodeKind, VulnGraph,
};
use snipsym_core::klee::ErrorKind;
use snipsym_core::snippet::{CveId, CveSnippet, Identity};
use snipsym_core::wrapper::{compile_offline, TemplateLibrary};

pub const FUNCTIONS: [&str; 5] =
    ["buffer_overflow_write", "use_after_free_access", "double_free_trigger", "integer_overflow_allocation", "main"];

fn message(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Ptr => "memory error: out of bound pointer",
        ErrorKind::External => "failed external call: __rust_dealloc",
        ErrorKind::Abort => "abort failure",
        ErrorKind::Div => "divide by zero",
        ErrorKind::Overflow => "overflow on addition",
    }
}

pub fn arb_kind() -> impl Strategy<Value = ErrorKind> {
    prop::sample::select(ErrorKind::ALL.to_vec())
}

fn arb_arg() -> impl Strategy<Value = FrameArg> {
    let value = prop_oneof![
        Just(ArgValue::Symbolic),
        any::<u64>().prop_map(ArgValue::Concrete),
        "0x[0-9a-f]{1,8}".prop_map(ArgValue::Other),
    ];
    (prop::sample::select(vec!["buffer", "ptr", "size", "offset", "value", "idx"]), value)
        .prop_map(|(name, value)| FrameArg { name: name.into(), value })
}

fn arb_frame() -> impl Strategy<Value = StackFrame> {
    (
        0u64..200_000_000,
        prop::sample::select(FUNCTIONS.to_vec()),
        prop::collection::vec(arb_arg(), 0..4),
        prop::option::of((1u32..500).prop_map(|l| format!("src/wrapper.rs:{l}"))),
    )
        .prop_map(|(index, function, args, location)| StackFrame {
            index,
            function: function.into(),
            args,
            location,
        })
}

/// A record exactly as `parse_error_file` would produce it from its own
/// rendering.
pub fn arb_record(test_no: u32) -> impl Strategy<Value = KleeErrorRecord> {
    let range =
        prop::option::of((0u64..u64::MAX / 2, 0u64..20_000).prop_flat_map(|(lo, w)| (Just((lo, lo + w)), lo..=lo + w)));
    let extra = prop::collection::btree_map(
        prop::sample::select(vec!["File", "Line", "State", "info.next"]),
        "[a-z0-9/.]{1,12}",
        0..3,
    );
    (arb_kind(), prop::collection::vec(arb_frame(), 0..3), range, any::<bool>(), extra).prop_map(
        move |(kind, stack, range, with_expr, extra)| {
            let mut r = KleeErrorRecord {
                test_id: format!("test{test_no:06}"),
                kind,
                message: message(kind).into(),
                stack,
                address_expr: with_expr.then(|| "(Add w64 4096 (ReadLSB w64 0 idx1))".to_string()),
                example_address: range.map(|(_, e)| e),
                address_range: range.map(|(r, _)| r),
                extra: extra.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                raw_text: String::new(),
                partial: false,
                warnings: vec![],
            };
            // Unrecognised argument values are kept but flag the record.
            r.partial = r.stack.iter().flat_map(|f| &f.args).any(|a| matches!(a.value, ArgValue::Other(_)));
            r.raw_text = render_error_file(&r);
            r
        },
    )
}

fn arb_records(max: usize) -> impl Strategy<Value = Vec<KleeErrorRecord>> {
    prop::collection::vec(arb_kind(), 0..=max)
        .prop_flat_map(|kinds| {
            let n = kinds.len();
            (Just(kinds), prop::collection::vec(prop::option::of(prop::sample::select(FUNCTIONS.to_vec())), n))
        })
        .prop_map(|(kinds, funcs)| {
            kinds
                .into_iter()
                .zip(funcs)
                .enumerate()
                .map(|(i, (kind, func))| KleeErrorRecord {
                    test_id: format!("test{:06}", i + 1),
                    kind,
                    message: message(kind).into(),
                    stack: func
                        .map(|f| StackFrame { index: 0, function: f.into(), args: vec![], location: None })
                        .into_iter()
                        .collect(),
                    address_expr: None,
                    example_address: None,
                    address_range: None,
                    extra: BTreeMap::new(),
                    raw_text: String::new(),
                    partial: false,
                    warnings: vec![],
                })
                .collect()
        })
}

/// Files with distinct CVE ids.
pub fn arb_files(max_files: usize, max_records: usize) -> impl Strategy<Value = Vec<FileResult>> {
    prop::collection::btree_set(1u32..60, 0..=max_files).prop_flat_map(move |ids| {
        let ids: Vec<u32> = ids.into_iter().collect();
        let n = ids.len();
        (
            Just(ids),
            prop::collection::vec(prop::sample::select(vec![119u32, 131, 190, 415, 416]), n),
            prop::collection::vec(arb_records(max_records), n),
        )
            .prop_map(|(ids, cwes, records)| {
                ids.into_iter()
                    .zip(cwes)
                    .zip(records)
                    .map(|((id, cwe), records)| FileResult {
                        identity: Identity::new(CveId::parse(&format!("CVE-2020-{id}")).unwrap(), cwe).unwrap(),
                        origin: format!("corpus/{id}.rs"),
                        records,
                    })
                    .collect()
            })
    })
}

fn check(cond: bool, what: &str) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(what.to_string()))
    }
}

/// Node/edge count identities, weight sums and path ownership.
pub fn check_counts(files: &[FileResult]) -> Result<(), TestCaseError> {
    let g = build_base_graph(files).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let cwes: BTreeSet<u32> = files.iter().map(|f| f.identity.cwe_id).collect();
    let kinds: BTreeSet<ErrorKind> = files.iter().flat_map(|f| f.records.iter().map(|r| r.kind)).collect();
    let records: usize = files.iter().map(|f| f.records.len()).sum();
    let pairs: usize = files.iter().map(|f| f.records.iter().map(|r| r.kind).collect::<BTreeSet<_>>().len()).sum();
    check(g.nodes.len() == files.len() + cwes.len() + kinds.len() + records, "node-count identity")?;
    check(g.edges.len() == files.len() + pairs + records, "edge-count identity")?;
    check(g.node_count(NodeKind::ErrorType) <= 5, "at most five error types")?;

    let weight_sum: u64 = g
        .edges_of(EdgeKind::HasError)
        .filter(|e| e.to_id == "err:ptr" || e.to_id == "err:external")
        .map(|e| e.weight.unwrap_or(0))
        .sum();
    let critical: u64 = files.iter().map(|f| summarize_criticality(&f.records).critical_total).sum();
    check(weight_sum == critical, "has_error weights equal critical totals")?;

    let mut incoming: BTreeMap<&str, usize> = BTreeMap::new();
    for e in g.edges_of(EdgeKind::TriggeredBy) {
        *incoming.entry(e.to_id.as_str()).or_default() += 1;
    }
    for n in g.nodes.values().filter(|n| n.node_kind == NodeKind::SymPath) {
        check(incoming.get(n.id.as_str()) == Some(&1), "one triggered_by per path")?;
    }
    let full = build_graph(files).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let by_cwe: u64 = errors_by_cwe(&full).iter().map(|r| r.critical_errors).sum();
    let by_cve: u64 = top_cves(&full, usize::MAX).iter().map(|t| t.total).sum();
    check(by_cwe == critical && by_cve == critical, "query sums agree")
}

/// Shared-pattern edges are canonical, idempotent, and match a brute-force
/// pairwise comparison of pattern keys.
pub fn check_shared_patterns(files: &[FileResult]) -> Result<(), TestCaseError> {
    let mut g = build_graph(files).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for e in g.edges_of(EdgeKind::SharedPattern) {
        check(e.from_id < e.to_id, "canonical order, no self loops")?;
    }
    let before = g.clone();
    g.recompute_shared_patterns();
    check(g == before, "recompute is idempotent")?;

    let keys = |f: &FileResult| -> BTreeSet<(ErrorKind, String)> {
        f.records.iter().filter_map(|r| r.faulting_function().map(|func| (r.kind, func.to_string()))).collect()
    };
    let mut expected = BTreeMap::new();
    for a in files {
        for b in files {
            let (ida, idb) =
                (format!("cve:{}", a.identity.cve_id.as_str()), format!("cve:{}", b.identity.cve_id.as_str()));
            if ida < idb {
                let shared = keys(a).intersection(&keys(b)).count() as u64;
                if shared > 0 {
                    expected.insert((ida, idb), shared);
                }
            }
        }
    }
    let got: BTreeMap<_, _> =
        shared_pattern_edges(&before).into_iter().map(|e| ((e.from_id, e.to_id), e.weight.unwrap())).collect();
    check(got == expected, "matches brute-force oracle")
}

pub fn check_jsonld_round_trip(g: &VulnGraph) -> Result<(), TestCaseError> {
    let first = serde_json::to_string(&export_jsonld(g)).unwrap();
    let reparsed: serde_json::Value = serde_json::from_str(&first).unwrap();
    let back = import_jsonld(&reparsed).map_err(|e| TestCaseError::fail(e.to_string()))?;
    check(&back == g, "import reconstructs the graph")?;
    check(serde_json::to_string(&export_jsonld(&back)).unwrap() == first, "export is byte-stable")
}

pub fn check_parser_round_trip(r: &KleeErrorRecord) -> Result<(), TestCaseError> {
    let parsed = parse_error_file(&r.raw_text, r.kind, &r.test_id).map_err(|e| TestCaseError::fail(e.to_string()))?;
    check(&parsed == r, "parse(render(r)) == r")
}

pub fn arb_snippet() -> impl Strategy<Value = CveSnippet> {
    let token = prop::sample::select(vec![
        "unsafe",
        "{",
        "}",
        "let",
        "x",
        "=",
        "ptr",
        ".",
        "add",
        "(",
        ")",
        ";",
        "from_raw_parts",
        "dealloc",
        "transmute",
        "self",
        "buf",
        "Ordering",
        "impl",
        "Drop",
        "for",
        "S",
        "\n",
        "drop_in_place",
        "get_unchecked",
    ]);
    (prop::collection::vec(token, 1..80), prop::sample::select(vec![119u32, 131, 415, 416, 999]), 1u32..9999).prop_map(
        |(tokens, cwe, n)| {
            let text = format!("fn f() {{ {} }}\n", tokens.join(" "));
            let id = Identity::new(CveId::parse(&format!("CVE-2021-{n}")).unwrap(), cwe).unwrap();
            CveSnippet::new(id, text, "gen.rs").unwrap()
        },
    )
}

/// Runs the four stages twice with fresh rule backends; results must match.
pub fn check_rule_determinism(snippet: &CveSnippet) -> Result<(), TestCaseError> {
    let run = || {
        let backend = RuleBackend::default();
        let plan = plan_analysis(snippet, &backend).unwrap();
        let risk = assess_safety(snippet, &plan.value, &backend).unwrap();
        let mut compile = |a: &snipsym_core::wrapper::WrapperArtifact| compile_offline(&a.source_text);
        let wrapper =
            generate_wrapper(snippet, &plan.value, &risk.value, &backend, &TemplateLibrary::builtin(), &mut compile)
                .unwrap();
        let params = select_params(&risk.value, &plan.value, &backend);
        (plan, risk, wrapper, params)
    };
    let (a, b) = (run(), run());
    check(a == b, "rule backend is deterministic")?;
    check(a.0.value.vulnerability_types[0] == snippet.cwe_id, "oracle echoes metadata")?;
    check(a.2.artifact.attempts_used == 1, "templates compile on the first attempt")
}
