//! The vulnerability property graph.
//!
//! Node ids follow a fixed scheme: `cve:<CVE-id>`, `cwe:<n>`, `err:<kind>` and
//! `path:<CVE-id>/<test_id>`. Two CVEs share a pattern when they own error
//! paths with the same (error kind, faulting function) key. Edges are kept
//! sorted by (from, kind, to) so equal graphs compare and serialize equal.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::errfile::{ArgValue, KleeErrorRecord};
use crate::klee::ErrorKind;
use crate::report::Ratio;
use crate::snippet::{CveSnippet, Identity};

pub const VOCAB: &str = "urn:snipsym:vocab#";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Cve,
    Cwe,
    ErrorType,
    SymPath,
}

impl NodeKind {
    pub const ALL: [NodeKind; 4] = [NodeKind::Cve, NodeKind::Cwe, NodeKind::ErrorType, NodeKind::SymPath];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Cve => "cve",
            NodeKind::Cwe => "cwe",
            NodeKind::ErrorType => "error_type",
            NodeKind::SymPath => "sym_path",
        }
    }

    fn iri_suffix(self) -> &'static str {
        match self {
            NodeKind::Cve => "CVE",
            NodeKind::Cwe => "CWE",
            NodeKind::ErrorType => "ErrorType",
            NodeKind::SymPath => "SymPath",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        NodeKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    HasError,
    TriggeredBy,
    ClassifiedAs,
    SharedPattern,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 4] =
        [EdgeKind::HasError, EdgeKind::TriggeredBy, EdgeKind::ClassifiedAs, EdgeKind::SharedPattern];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::HasError => "has_error",
            EdgeKind::TriggeredBy => "triggered_by",
            EdgeKind::ClassifiedAs => "classified_as",
            EdgeKind::SharedPattern => "shared_pattern",
        }
    }

    fn iri_suffix(self) -> &'static str {
        match self {
            EdgeKind::HasError => "hasError",
            EdgeKind::TriggeredBy => "triggeredBy",
            EdgeKind::ClassifiedAs => "classifiedAs",
            EdgeKind::SharedPattern => "sharedPattern",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        EdgeKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub node_kind: NodeKind,
    pub attrs: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from_id: String,
    pub edge_kind: EdgeKind,
    pub to_id: String,
    pub weight: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnGraph {
    pub nodes: BTreeMap<String, GraphNode>,
    pub edges: Vec<GraphEdge>,
}

/// Parsed records of one analysed file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileResult {
    pub identity: Identity,
    pub origin: String,
    pub records: Vec<KleeErrorRecord>,
}

impl FileResult {
    pub fn from_snippet(snippet: &CveSnippet, records: Vec<KleeErrorRecord>) -> Self {
        FileResult { identity: snippet.identity(), origin: snippet.origin_path.clone(), records }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("duplicate {cve_id}: {first} and {second}")]
    DuplicateCve { cve_id: String, first: String, second: String },
    #[error("duplicate node id {0}")]
    DuplicateId(String),
    #[error("edge {kind} from {from} references missing node {to}")]
    Dangling { kind: String, from: String, to: String },
    #[error("unknown edge kind {kind:?} on node {node}")]
    UnknownEdgeKind { node: String, kind: String },
    #[error("unknown node kind {kind:?} on node {node}")]
    UnknownNodeKind { node: String, kind: String },
    #[error("malformed document: {0}")]
    Malformed(String),
}

pub fn cve_node_id(cve: &str) -> String {
    format!("cve:{cve}")
}

pub fn cwe_node_id(cwe: u32) -> String {
    format!("cwe:{cwe}")
}

pub fn err_node_id(kind: ErrorKind) -> String {
    format!("err:{kind}")
}

fn attrs(pairs: impl IntoIterator<Item = (&'static str, Value)>) -> BTreeMap<String, Value> {
    pairs.into_iter().filter(|(_, v)| !v.is_null()).map(|(k, v)| (k.to_string(), v)).collect()
}

fn concrete_inputs(record: &KleeErrorRecord) -> Value {
    let map: Map<String, Value> = record
        .frame_args()
        .iter()
        .map(|a| {
            let v = match &a.value {
                ArgValue::Symbolic => Value::String("symbolic".into()),
                ArgValue::Concrete(n) => json!(n),
                ArgValue::Other(s) => Value::String(s.clone()),
            };
            (a.name.clone(), v)
        })
        .collect();
    Value::Object(map)
}

impl VulnGraph {
    fn add_node(&mut self, id: String, node_kind: NodeKind, attrs: BTreeMap<String, Value>) {
        self.nodes.entry(id.clone()).or_insert(GraphNode { id, node_kind, attrs });
    }

    fn sort_edges(&mut self) {
        self.edges.sort();
        self.edges.dedup();
    }

    pub fn node_count(&self, kind: NodeKind) -> usize {
        self.nodes.values().filter(|n| n.node_kind == kind).count()
    }

    pub fn edge_count(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.edge_kind == kind).count()
    }

    pub fn edges_of(&self, kind: EdgeKind) -> impl Iterator<Item = &GraphEdge> {
        self.edges.iter().filter(move |e| e.edge_kind == kind)
    }

    /// Replaces all shared-pattern edges with a fresh computation.
    pub fn recompute_shared_patterns(&mut self) {
        let shared = shared_pattern_edges(self);
        self.edges.retain(|e| e.edge_kind != EdgeKind::SharedPattern);
        self.edges.extend(shared);
        self.sort_edges();
    }

    /// Checks the structural invariants; used after import and in tests.
    pub fn validate(&self) -> Result<(), GraphError> {
        for e in &self.edges {
            for end in [&e.from_id, &e.to_id] {
                if !self.nodes.contains_key(end) {
                    return Err(GraphError::Dangling {
                        kind: e.edge_kind.to_string(),
                        from: e.from_id.clone(),
                        to: end.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Builds the graph, including shared-pattern edges.
pub fn build_graph(files: &[FileResult]) -> Result<VulnGraph, GraphError> {
    let mut g = build_base_graph(files)?;
    g.recompute_shared_patterns();
    Ok(g)
}

/// Builds the graph without shared-pattern edges.
pub fn build_base_graph(files: &[FileResult]) -> Result<VulnGraph, GraphError> {
    let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
    for f in files {
        if let Some(first) = seen.insert(f.identity.cve_id.as_str(), &f.origin) {
            return Err(GraphError::DuplicateCve {
                cve_id: f.identity.cve_id.as_str().to_string(),
                first: first.to_string(),
                second: f.origin.clone(),
            });
        }
    }
    let mut g = VulnGraph::default();
    for f in files {
        let cve = f.identity.cve_id.as_str();
        let cve_id = cve_node_id(cve);
        let cwe_id = cwe_node_id(f.identity.cwe_id);
        g.add_node(
            cve_id.clone(),
            NodeKind::Cve,
            attrs([("cve_id", json!(cve)), ("cwe_id", json!(f.identity.cwe_id))]),
        );
        g.add_node(cwe_id.clone(), NodeKind::Cwe, attrs([("cwe_id", json!(f.identity.cwe_id))]));
        g.edges.push(GraphEdge {
            from_id: cve_id.clone(),
            edge_kind: EdgeKind::ClassifiedAs,
            to_id: cwe_id,
            weight: None,
        });

        let mut per_kind: BTreeMap<ErrorKind, u64> = BTreeMap::new();
        for r in &f.records {
            *per_kind.entry(r.kind).or_default() += 1;
            let mut path_id = format!("path:{cve}/{}", r.test_id);
            if g.nodes.contains_key(&path_id) {
                path_id = format!("{path_id}.{}", r.kind);
            }
            g.add_node(
                path_id.clone(),
                NodeKind::SymPath,
                attrs([
                    ("test_id", json!(r.test_id)),
                    ("kind", json!(r.kind.as_str())),
                    ("faulting_function", r.faulting_function().map_or(Value::Null, |f| json!(f))),
                    ("inputs", concrete_inputs(r)),
                    ("example_address", r.example_address.map_or(Value::Null, |a| json!(a))),
                ]),
            );
            g.edges.push(GraphEdge {
                from_id: cve_id.clone(),
                edge_kind: EdgeKind::TriggeredBy,
                to_id: path_id,
                weight: None,
            });
        }
        for (kind, count) in per_kind {
            let err_id = err_node_id(kind);
            g.add_node(err_id.clone(), NodeKind::ErrorType, attrs([("kind", json!(kind.as_str()))]));
            g.edges.push(GraphEdge {
                from_id: cve_id.clone(),
                edge_kind: EdgeKind::HasError,
                to_id: err_id,
                weight: Some(count),
            });
        }
    }
    g.sort_edges();
    Ok(g)
}

fn pattern_key(node: &GraphNode) -> Option<(String, String)> {
    let kind = node.attrs.get("kind")?.as_str()?;
    let func = node.attrs.get("faulting_function")?.as_str()?;
    Some((kind.to_string(), func.to_string()))
}

/// Shared-pattern edges implied by the graph's error paths. Paths without a
/// faulting function carry no pattern.
pub fn shared_pattern_edges(g: &VulnGraph) -> Vec<GraphEdge> {
    let mut keys: BTreeMap<&str, BTreeSet<(String, String)>> = BTreeMap::new();
    for e in g.edges_of(EdgeKind::TriggeredBy) {
        if let Some(key) = g.nodes.get(&e.to_id).and_then(pattern_key) {
            keys.entry(e.from_id.as_str()).or_default().insert(key);
        }
    }
    let cves: Vec<(&str, &BTreeSet<(String, String)>)> = keys.iter().map(|(k, v)| (*k, v)).collect();
    let mut out = Vec::new();
    for (i, (a, ka)) in cves.iter().enumerate() {
        for (b, kb) in &cves[i + 1..] {
            let shared = ka.intersection(kb).count() as u64;
            if shared > 0 {
                out.push(GraphEdge {
                    from_id: a.to_string(),
                    edge_kind: EdgeKind::SharedPattern,
                    to_id: b.to_string(),
                    weight: Some(shared),
                });
            }
        }
    }
    out
}

fn context() -> Value {
    let mut ctx = Map::new();
    ctx.insert("@vocab".into(), json!(VOCAB));
    for k in NodeKind::ALL {
        ctx.insert(k.as_str().into(), json!(format!("{VOCAB}{}", k.iri_suffix())));
    }
    for k in EdgeKind::ALL {
        ctx.insert(k.as_str().into(), json!({ "@id": format!("{VOCAB}{}", k.iri_suffix()), "@type": "@id" }));
    }
    ctx.insert("weight".into(), json!(format!("{VOCAB}weight")));
    Value::Object(ctx)
}

/// Serializes to JSON-LD: one object per node, ordered by id, with outgoing
/// edges embedded as `{"@id": <target>, "weight": n}` references.
pub fn export_jsonld(g: &VulnGraph) -> Value {
    let mut out: BTreeMap<&str, Map<String, Value>> = BTreeMap::new();
    for n in g.nodes.values() {
        let mut obj: Map<String, Value> = n.attrs.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        obj.insert("@id".into(), json!(n.id));
        obj.insert("@type".into(), json!(n.node_kind.as_str()));
        out.insert(&n.id, obj);
    }
    for e in &g.edges {
        let obj = out.get_mut(e.from_id.as_str()).expect("edges reference existing nodes");
        let mut reference = Map::new();
        reference.insert("@id".into(), json!(e.to_id));
        if let Some(w) = e.weight {
            reference.insert("weight".into(), json!(w));
        }
        let slot = obj.entry(e.edge_kind.as_str()).or_insert_with(|| Value::Array(Vec::new()));
        slot.as_array_mut().expect("edge slots are arrays").push(Value::Object(reference));
    }
    json!({ "@context": context(), "@graph": out.into_values().map(Value::Object).collect::<Vec<_>>() })
}

fn is_reference_list(v: &Value) -> bool {
    v.as_array().is_some_and(|items| !items.is_empty() && items.iter().all(|i| i.get("@id").is_some()))
}

pub fn import_jsonld(doc: &Value) -> Result<VulnGraph, GraphError> {
    let malformed = |m: &str| GraphError::Malformed(m.to_string());
    let obj = doc.as_object().ok_or_else(|| malformed("expected an object"))?;
    if !obj.get("@context").is_some_and(Value::is_object) {
        return Err(malformed("missing @context"));
    }
    let items = obj.get("@graph").and_then(Value::as_array).ok_or_else(|| malformed("missing @graph array"))?;
    let mut g = VulnGraph::default();
    for item in items {
        let node = item.as_object().ok_or_else(|| malformed("@graph entries must be objects"))?;
        let id = node.get("@id").and_then(Value::as_str).ok_or_else(|| malformed("node without @id"))?;
        let ty = node.get("@type").and_then(Value::as_str).unwrap_or_default();
        let node_kind =
            NodeKind::parse(ty).ok_or_else(|| GraphError::UnknownNodeKind { node: id.into(), kind: ty.into() })?;
        let mut attrs = BTreeMap::new();
        for (key, value) in node {
            if key.starts_with('@') {
                continue;
            }
            if !is_reference_list(value) {
                attrs.insert(key.clone(), value.clone());
                continue;
            }
            let edge_kind = EdgeKind::parse(key)
                .ok_or_else(|| GraphError::UnknownEdgeKind { node: id.into(), kind: key.clone() })?;
            for r in value.as_array().into_iter().flatten() {
                let to = r.get("@id").and_then(Value::as_str).ok_or_else(|| malformed("edge @id must be a string"))?;
                let weight = match r.get("weight") {
                    None => None,
                    Some(w) => Some(w.as_u64().filter(|&w| w >= 1).ok_or_else(|| malformed("weight must be ≥ 1"))?),
                };
                g.edges.push(GraphEdge { from_id: id.into(), edge_kind, to_id: to.into(), weight });
            }
        }
        if g.nodes.insert(id.into(), GraphNode { id: id.into(), node_kind, attrs }).is_some() {
            return Err(GraphError::DuplicateId(id.into()));
        }
    }
    g.validate()?;
    g.sort_edges();
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CweRow {
    pub cwe_id: u32,
    pub files: u64,
    pub detected_files: u64,
    pub detection_rate: Ratio,
    pub critical_errors: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopCve {
    pub cve_id: String,
    pub ptr: u64,
    pub external: u64,
    pub total: u64,
}

fn cve_name(g: &VulnGraph, id: &str) -> String {
    g.nodes
        .get(id)
        .and_then(|n| n.attrs.get("cve_id"))
        .and_then(Value::as_str)
        .map_or_else(|| id.trim_start_matches("cve:").to_string(), String::from)
}

/// Per-CVE (ptr, external) counts from has_error weights.
fn critical_counts(g: &VulnGraph) -> BTreeMap<&str, (u64, u64)> {
    let mut out: BTreeMap<&str, (u64, u64)> =
        g.nodes.values().filter(|n| n.node_kind == NodeKind::Cve).map(|n| (n.id.as_str(), (0, 0))).collect();
    let (ptr, ext) = (err_node_id(ErrorKind::Ptr), err_node_id(ErrorKind::External));
    for e in g.edges_of(EdgeKind::HasError) {
        let w = e.weight.unwrap_or(0);
        let entry = out.entry(e.from_id.as_str()).or_default();
        if e.to_id == ptr {
            entry.0 += w;
        } else if e.to_id == ext {
            entry.1 += w;
        }
    }
    out
}

pub fn errors_by_cwe(g: &VulnGraph) -> Vec<CweRow> {
    let counts = critical_counts(g);
    let mut rows: BTreeMap<u32, CweRow> = BTreeMap::new();
    for e in g.edges_of(EdgeKind::ClassifiedAs) {
        let Some(cwe) = g.nodes.get(&e.to_id).and_then(|n| n.attrs.get("cwe_id")).and_then(Value::as_u64) else {
            continue;
        };
        let cwe = cwe as u32;
        let row = rows.entry(cwe).or_insert(CweRow {
            cwe_id: cwe,
            files: 0,
            detected_files: 0,
            detection_rate: Ratio::new(0, 0),
            critical_errors: 0,
        });
        let (p, x) = counts.get(e.from_id.as_str()).copied().unwrap_or_default();
        row.files += 1;
        row.critical_errors += p + x;
        if p + x >= 1 {
            row.detected_files += 1;
        }
        row.detection_rate = Ratio::new(row.detected_files, row.files);
    }
    rows.into_values().collect()
}

pub fn top_cves(g: &VulnGraph, n: usize) -> Vec<TopCve> {
    let mut all: Vec<TopCve> = critical_counts(g)
        .into_iter()
        .map(|(id, (ptr, external))| TopCve { cve_id: cve_name(g, id), ptr, external, total: ptr + external })
        .collect();
    all.sort_by(|a, b| b.total.cmp(&a.total).then_with(|| a.cve_id.cmp(&b.cve_id)));
    all.truncate(n);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::errfile::{FrameArg, StackFrame};
    use alloc::vec;

    pub(crate) fn record(test_id: &str, kind: ErrorKind, func: Option<&str>) -> KleeErrorRecord {
        KleeErrorRecord {
            test_id: test_id.into(),
            kind,
            message: "memory error".into(),
            stack: func
                .map(|f| StackFrame {
                    index: 0,
                    function: f.into(),
                    args: vec![FrameArg { name: "size".into(), value: ArgValue::Concrete(7) }],
                    location: None,
                })
                .into_iter()
                .collect(),
            address_expr: None,
            example_address: None,
            address_range: None,
            extra: BTreeMap::new(),
            raw_text: String::new(),
            partial: false,
            warnings: vec![],
        }
    }

    fn file(name: &str, records: Vec<KleeErrorRecord>) -> FileResult {
        FileResult { identity: Identity::from_name(name).unwrap(), origin: format!("{name}.rs"), records }
    }

    #[test]
    fn one_file_two_ptr_records() {
        let g = build_base_graph(&[file(
            "cwe-416-cve-2021-0001",
            vec![record("test000001", ErrorKind::Ptr, Some("f")), record("test000002", ErrorKind::Ptr, Some("f"))],
        )])
        .unwrap();
        assert_eq!(g.nodes.len(), 5);
        assert_eq!(g.edges.len(), 4);
        let he: Vec<_> = g.edges_of(EdgeKind::HasError).collect();
        assert_eq!(he[0].weight, Some(2));
        assert!(g.nodes.contains_key("path:CVE-2021-0001/test000002"));
    }

    #[test]
    fn empty_graph() {
        let g = build_graph(&[]).unwrap();
        assert!(g.nodes.is_empty() && g.edges.is_empty());
        assert_eq!(serde_json::to_string(&export_jsonld(&g)["@graph"]).unwrap(), "[]");
    }

    #[test]
    fn duplicate_cve_names_both_paths() {
        let mut b = file("cwe-416-cve-2021-0001", vec![]);
        b.origin = "elsewhere/copy.rs".into();
        let err = build_graph(&[file("cwe-416-cve-2021-0001", vec![]), b]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cwe-416-cve-2021-0001.rs") && msg.contains("elsewhere/copy.rs"), "{msg}");
    }

    #[test]
    fn shared_patterns() {
        let a =
            file("cwe-416-cve-2021-0002", vec![record("test000001", ErrorKind::Ptr, Some("use_after_free_access"))]);
        let b =
            file("cwe-416-cve-2021-0001", vec![record("test000004", ErrorKind::Ptr, Some("use_after_free_access"))]);
        let g = build_graph(&[a.clone(), b.clone()]).unwrap();
        let sp: Vec<_> = g.edges_of(EdgeKind::SharedPattern).collect();
        assert_eq!(sp.len(), 1);
        assert_eq!(sp[0].from_id, "cve:CVE-2021-0001");
        assert_eq!(sp[0].weight, Some(1));

        let mut a2 = a.clone();
        a2.records.push(record("test000002", ErrorKind::External, Some("use_after_free_access")));
        let mut b2 = b.clone();
        b2.records.push(record("test000005", ErrorKind::External, Some("use_after_free_access")));
        b2.records.push(record("test000006", ErrorKind::External, None));
        let g = build_graph(&[a2, b2]).unwrap();
        assert_eq!(g.edges_of(EdgeKind::SharedPattern).next().unwrap().weight, Some(2));

        assert_eq!(build_graph(&[a]).unwrap().edge_count(EdgeKind::SharedPattern), 0);
    }

    #[test]
    fn queries() {
        let g = build_graph(&[
            file("cwe-131-cve-2021-0001", vec![record("test000001", ErrorKind::Ptr, None)]),
            file("cwe-131-cve-2021-0002", vec![record("test000001", ErrorKind::External, None)]),
            file("cwe-416-cve-2021-0003", vec![record("test000001", ErrorKind::Abort, None)]),
        ])
        .unwrap();
        let rows = errors_by_cwe(&g);
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].cwe_id, rows[0].files, rows[0].detected_files, rows[0].critical_errors), (131, 2, 2, 2));
        assert_eq!((rows[1].files, rows[1].detected_files, rows[1].critical_errors), (1, 0, 0));
        let top = top_cves(&g, 10);
        assert_eq!(top.len(), 3);
        // equal totals fall back to id order
        assert_eq!(top[0].cve_id, "CVE-2021-0001");
        assert_eq!(top[1].cve_id, "CVE-2021-0002");
        assert_eq!(top_cves(&g, 1).len(), 1);
    }

    #[test]
    fn jsonld_round_trip_and_rejections() {
        let g = build_graph(&[
            file("cwe-131-cve-2021-0001", vec![record("test000001", ErrorKind::Ptr, Some("f"))]),
            file("cwe-131-cve-2021-0002", vec![record("test000003", ErrorKind::Ptr, Some("f"))]),
        ])
        .unwrap();
        let doc = export_jsonld(&g);
        let back = import_jsonld(&doc).unwrap();
        assert_eq!(back, g);
        assert_eq!(serde_json::to_string(&export_jsonld(&back)).unwrap(), serde_json::to_string(&doc).unwrap());

        let mut broken = doc.clone();
        broken["@graph"][0]["classified_as"] = json!([{ "@id": "cwe:999" }]);
        match import_jsonld(&broken) {
            Err(GraphError::Dangling { to, .. }) => assert_eq!(to, "cwe:999"),
            other => panic!("{other:?}"),
        }
        let mut unknown = doc.clone();
        unknown["@graph"][0]["mentions"] = json!([{ "@id": "cwe:131" }]);
        assert!(matches!(import_jsonld(&unknown), Err(GraphError::UnknownEdgeKind { .. })));
        let mut dup = doc.clone();
        let first = dup["@graph"][0].clone();
        dup["@graph"].as_array_mut().unwrap().push(first);
        assert!(matches!(import_jsonld(&dup), Err(GraphError::DuplicateId(_))));
    }
}
