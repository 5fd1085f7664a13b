//! Corpus metrics, baseline classification and the JSON report document.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::errfile::{ConfidenceWeights, CriticalitySummary};
use crate::klee::KleeParams;

pub const SCHEMA_VERSION: &str = "1.0";

/// An exact fraction. Rendered as a percentage rounded half-up to one
/// decimal: 26/31 is "83.9%".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "RatioRepr", into = "RatioRepr")]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

#[derive(Serialize, Deserialize)]
struct RatioRepr {
    numerator: u64,
    denominator: u64,
    #[serde(default)]
    value: f64,
    #[serde(default)]
    percent: String,
}

impl From<RatioRepr> for Ratio {
    fn from(r: RatioRepr) -> Self {
        Ratio { num: r.numerator, den: r.denominator }
    }
}

impl From<Ratio> for RatioRepr {
    fn from(r: Ratio) -> Self {
        RatioRepr { numerator: r.num, denominator: r.den, value: r.value(), percent: r.percent() }
    }
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        Ratio { num, den }
    }

    pub fn value(self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }

    /// Tenths of a percent, rounded half-up, in integer arithmetic.
    pub fn tenths_of_percent(self) -> u64 {
        if self.den == 0 {
            return 0;
        }
        let (n, d) = (self.num as u128, self.den as u128);
        ((n * 2000 + d) / (2 * d)) as u64
    }

    pub fn percent(self) -> String {
        let t = self.tenths_of_percent();
        format!("{}.{}%", t / 10, t % 10)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.percent())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompileOrigin {
    Generated,
    Fallback,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileReport {
    pub cve_id: String,
    pub cwe_id: u32,
    /// `None` when results were replayed without running the pipeline.
    pub compile_origin: Option<CompileOrigin>,
    pub attempts_used: u32,
    pub summary: CriticalitySummary,
    pub detected: bool,
    pub risk_score: Option<f64>,
    pub params: Option<KleeParams>,
    pub failed_stage: Option<String>,
    pub artifact_paths: BTreeMap<String, String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl FileReport {
    pub fn new(cve_id: &str, cwe_id: u32, summary: CriticalitySummary) -> Self {
        FileReport {
            cve_id: cve_id.to_string(),
            cwe_id,
            compile_origin: None,
            attempts_used: 0,
            summary,
            detected: summary.detected(),
            risk_score: None,
            params: None,
            failed_stage: None,
            artifact_paths: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub files: u64,
    pub compiled_generated: u64,
    pub fallback_used: u64,
    pub compile_failed: u64,
    pub detected: u64,
    pub compile_rate: Ratio,
    pub fallback_rate: Ratio,
    pub detection_rate: Ratio,
    pub total_ptr: u64,
    pub total_external: u64,
    pub total_critical: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("empty corpus")]
    EmptyCorpus,
}

pub fn compute_metrics(reports: &[FileReport]) -> Result<RunMetrics, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let files = reports.len() as u64;
    let origin = |o| reports.iter().filter(|r| r.compile_origin == Some(o)).count() as u64;
    let (generated, fallback, failed) =
        (origin(CompileOrigin::Generated), origin(CompileOrigin::Fallback), origin(CompileOrigin::Failed));
    let detected = reports.iter().filter(|r| r.detected).count() as u64;
    let total_ptr = reports.iter().map(|r| r.summary.ptr_count).sum();
    let total_external = reports.iter().map(|r| r.summary.external_count).sum();
    Ok(RunMetrics {
        files,
        compiled_generated: generated,
        fallback_used: fallback,
        compile_failed: failed,
        detected,
        compile_rate: Ratio::new(generated, files),
        fallback_rate: Ratio::new(fallback, files),
        detection_rate: Ratio::new(detected, files),
        total_ptr,
        total_external,
        total_critical: total_ptr + total_external,
    })
}

/// Per-file detection agreement between this tool and a baseline linter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub only_ours: Vec<String>,
    pub only_baseline: Vec<String>,
    pub both: Vec<String>,
    pub neither: Vec<String>,
    /// Files absent from the baseline map, treated as zero warnings.
    #[serde(default)]
    pub missing_baseline: Vec<String>,
}

impl BaselineComparison {
    pub fn counts(&self) -> [usize; 4] {
        [self.only_ours.len(), self.only_baseline.len(), self.both.len(), self.neither.len()]
    }
}

pub fn classify_against_baseline(reports: &[FileReport], baseline: &BTreeMap<String, u64>) -> BaselineComparison {
    let mut cmp = BaselineComparison::default();
    for r in reports {
        let warnings = match baseline.get(&r.cve_id) {
            Some(&w) => w,
            None => {
                cmp.missing_baseline.push(r.cve_id.clone());
                0
            }
        };
        let bucket = match (r.detected, warnings >= 1) {
            (true, false) => &mut cmp.only_ours,
            (false, true) => &mut cmp.only_baseline,
            (true, true) => &mut cmp.both,
            (false, false) => &mut cmp.neither,
        };
        bucket.push(r.cve_id.clone());
    }
    for list in [&mut cmp.only_ours, &mut cmp.only_baseline, &mut cmp.both, &mut cmp.neither, &mut cmp.missing_baseline]
    {
        list.sort();
    }
    cmp
}

/// Builds the report document. Files are ordered by CVE id; keys are sorted.
pub fn emit_report(
    reports: &[FileReport],
    metrics: &RunMetrics,
    comparison: Option<&BaselineComparison>,
    weights: &ConfidenceWeights,
) -> Value {
    let mut files: Vec<&FileReport> = reports.iter().collect();
    files.sort_by(|a, b| a.cve_id.cmp(&b.cve_id));
    let files: Vec<Value> = files
        .into_iter()
        .map(|r| {
            let mut v = serde_json::to_value(r).expect("report serializes");
            v["confidence_score"] = json!(weights.weighted_score(&r.summary));
            v
        })
        .collect();
    let mut doc = json!({
        "schema_version": SCHEMA_VERSION,
        "files": files,
        "metrics": serde_json::to_value(metrics).expect("metrics serialize"),
        "confidence_weights": serde_json::to_value(weights).expect("weights serialize"),
    });
    if let Some(c) = comparison {
        doc["baseline_comparison"] = serde_json::to_value(c).expect("comparison serializes");
    }
    doc
}

/// Pads each column to its widest cell; the first row is the header.
pub fn render_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row.iter().enumerate().map(|(c, s)| format!("{s:<w$}", w = widths[c])).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out
}

pub fn render_metrics(m: &RunMetrics) -> String {
    let row = |k: &str, v: String| alloc::vec![k.to_string(), v];
    render_table(&[
        row("metric", "value".into()),
        row("files", m.files.to_string()),
        row("compiled (generated)", format!("{} ({})", m.compiled_generated, m.compile_rate)),
        row("fallback used", format!("{} ({})", m.fallback_used, m.fallback_rate)),
        row("compile failed", m.compile_failed.to_string()),
        row("detected", format!("{} ({})", m.detected, m.detection_rate)),
        row("ptr errors", m.total_ptr.to_string()),
        row("external errors", m.total_external.to_string()),
        row("critical errors", m.total_critical.to_string()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::errfile::summarize_kinds;
    use crate::klee::ErrorKind;
    use alloc::vec;

    #[test]
    fn percent_rounding() {
        assert_eq!(Ratio::new(26, 31).percent(), "83.9%");
        assert_eq!(Ratio::new(28, 31).percent(), "90.3%");
        assert_eq!(Ratio::new(3, 31).percent(), "9.7%");
        assert_eq!(Ratio::new(11, 31).percent(), "35.5%");
        assert_eq!(Ratio::new(1, 8).percent(), "12.5%");
        // 1/16 = 6.25% rounds half up
        assert_eq!(Ratio::new(1, 16).percent(), "6.3%");
        assert_eq!(Ratio::new(0, 5).percent(), "0.0%");
        assert_eq!(Ratio::new(5, 5).percent(), "100.0%");
    }

    #[test]
    fn ratio_round_trips_through_json() {
        let r = Ratio::new(26, 31);
        let v = serde_json::to_value(r).unwrap();
        assert_eq!(v["percent"], "83.9%");
        assert_eq!(serde_json::from_value::<Ratio>(v).unwrap(), r);
    }

    fn report(id: &str, origin: CompileOrigin, kinds: &[ErrorKind]) -> FileReport {
        let mut r = FileReport::new(id, 131, summarize_kinds(kinds.iter().copied()));
        r.compile_origin = Some(origin);
        r
    }

    #[test]
    fn metrics_over_thirty_one_files() {
        let reports: Vec<FileReport> = (0..31)
            .map(|i| {
                let origin = if i < 28 { CompileOrigin::Generated } else { CompileOrigin::Fallback };
                let kinds: &[ErrorKind] = if i < 26 { &[ErrorKind::Ptr] } else { &[ErrorKind::Abort] };
                report(&format!("CVE-2000-{i:04}"), origin, kinds)
            })
            .collect();
        let m = compute_metrics(&reports).unwrap();
        assert_eq!(m.detection_rate.percent(), "83.9%");
        assert_eq!(m.compile_rate.percent(), "90.3%");
        assert_eq!(m.fallback_rate.percent(), "9.7%");
        assert_eq!(m.total_critical, 26);
        assert_eq!(compute_metrics(&[]), Err(MetricsError::EmptyCorpus));
    }

    #[test]
    fn baseline_buckets() {
        let hit = report("CVE-2022-36008", CompileOrigin::Generated, &[ErrorKind::External]);
        let miss = report("CVE-2021-0001", CompileOrigin::Generated, &[]);
        let base: BTreeMap<String, u64> = [("CVE-2022-36008".into(), 0)].into();
        let c = classify_against_baseline(&[hit, miss], &base);
        assert_eq!(c.only_ours, vec!["CVE-2022-36008"]);
        assert_eq!(c.neither, vec!["CVE-2021-0001"]);
        assert_eq!(c.missing_baseline, vec!["CVE-2021-0001"]);
    }

    #[test]
    fn report_is_deterministic_and_carries_weights() {
        let reports = [
            report("CVE-2021-0002", CompileOrigin::Fallback, &[ErrorKind::Ptr, ErrorKind::External]),
            report("CVE-2021-0001", CompileOrigin::Generated, &[]),
        ];
        let m = compute_metrics(&reports).unwrap();
        let w = ConfidenceWeights::default();
        let a = serde_json::to_string(&emit_report(&reports, &m, None, &w)).unwrap();
        let b = serde_json::to_string(&emit_report(&reports, &m, None, &w)).unwrap();
        assert_eq!(a, b);
        let doc: Value = serde_json::from_str(&a).unwrap();
        assert_eq!(doc["confidence_weights"]["ptr"], 1.0);
        assert_eq!(doc["files"][0]["cve_id"], "CVE-2021-0001");
        assert_eq!(doc["files"][1]["confidence_score"], 1.5);
        assert!(doc.get("baseline_comparison").is_none());
        let back: RunMetrics = serde_json::from_value(doc["metrics"].clone()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn table_alignment() {
        let t = render_table(&[vec!["a".into(), "bb".into()], vec!["ccc".into(), "d".into()]]);
        assert_eq!(t, "a    bb\n---  --\nccc  d\n");
    }
}
