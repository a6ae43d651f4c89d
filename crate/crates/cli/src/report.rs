//! Report structures printed by the CLI.
//!
//! Every report is serialized once to a JSON value; the text form is a
//! flattened `path: value` listing of that same value, so both carry
//! identical numbers. Key order follows field declaration order.

use serde::Serialize;
use serde_json::Value;

use gpq_core::codec::ContainerHeader;
use gpq_core::metrics::FidelityReport;
use gpq_core::quantizer::mib_2dp;
use gpq_core::SizeReport;

use crate::args::ReportFormat;

/// Size accounting with byte and MiB figures added.
#[derive(Debug, Clone, Serialize)]
pub struct SizeSummary {
    pub theoretical_bits: f64,
    pub storable_bits: u64,
    pub storable_bytes: u64,
    pub storable_mib: f64,
    pub float_params: u64,
    pub int_params: u64,
    pub baseline_bits: u64,
    pub baseline_bytes: u64,
    pub baseline_mib: f64,
    pub compression_ratio: f64,
}

impl From<&SizeReport> for SizeSummary {
    fn from(r: &SizeReport) -> Self {
        Self {
            theoretical_bits: r.theoretical_bits,
            storable_bits: r.storable_bits,
            storable_bytes: r.storable_bytes(),
            storable_mib: mib_2dp(r.storable_bytes()),
            float_params: r.float_params,
            int_params: r.int_params,
            baseline_bits: r.baseline_bits,
            baseline_bytes: r.baseline_bytes(),
            baseline_mib: mib_2dp(r.baseline_bytes()),
            compression_ratio: r.compression_ratio,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HeaderSummary {
    pub version: u8,
    pub method: &'static str,
    pub scheme: &'static str,
    pub rows: u64,
    pub cols: u32,
    pub groups: u32,
    pub clusters: u32,
    pub float_bits: u8,
    pub seed: u64,
    pub flags: u8,
}

impl From<&ContainerHeader> for HeaderSummary {
    fn from(h: &ContainerHeader) -> Self {
        Self {
            version: h.version,
            method: if h.has_variances() { "gpq" } else { "pq" },
            scheme: match h.scheme().kind {
                gpq_core::PartitionKind::Structured => "structured",
                gpq_core::PartitionKind::Unified => "unified",
            },
            rows: h.rows,
            cols: h.cols,
            groups: h.groups,
            clusters: h.clusters,
            float_bits: h.float_bits,
            seed: h.seed,
            flags: h.flags,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompressReport {
    pub command: &'static str,
    pub header: HeaderSummary,
    pub restarts: usize,
    pub header_bytes: usize,
    pub file_bytes: usize,
    pub size: SizeSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct InfoReport {
    pub command: &'static str,
    pub header: HeaderSummary,
    pub header_bytes: usize,
    pub file_bytes: usize,
    pub size: SizeSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct RweReport {
    pub command: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    pub projection_dim: Option<usize>,
    pub size: SizeSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelitySummary {
    pub rmse: f64,
    pub mean_cosine: f64,
    pub nn_overlap_at_k: f64,
    pub k: usize,
}

impl From<&FidelityReport> for FidelitySummary {
    fn from(f: &FidelityReport) -> Self {
        Self {
            rmse: f.rmse,
            mean_cosine: f.mean_cosine,
            nn_overlap_at_k: f.nn_overlap_at_k,
            k: f.k,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub command: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub fidelity: FidelitySummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub groups: usize,
    pub clusters: usize,
    pub size: SizeSummary,
    pub fidelity: FidelitySummary,
}

fn flatten(prefix: &str, value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, out);
            }
        }
        Value::String(s) => out.push_str(&format!("{prefix}: {s}\n")),
        other => out.push_str(&format!("{prefix}: {other}\n")),
    }
}

/// Renders a report in the requested format, newline terminated.
pub fn render<T: Serialize>(report: &T, format: ReportFormat) -> String {
    let value = serde_json::to_value(report).expect("reports serialize");
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&value).expect("json value serializes");
            s.push('\n');
            s
        }
        ReportFormat::Text => {
            let mut s = String::new();
            flatten("", &value, &mut s);
            s
        }
    }
}
