use std::fs;
use std::path::{Path, PathBuf};

use super::aggregate::CohortReport;
use super::scan::{ScanRow, ScanStatus};
use crate::attenuate::{Flag, Label, Method};
use crate::{Error, Result};

pub const REPORT_JSON: &str = "report.json";
pub const SCANS_CSV: &str = "scans.csv";
pub const ROC_CSV: &str = "roc_curves.csv";
pub const BOXPLOT_CSV: &str = "boxplot.csv";
pub const SCATTER_CSV: &str = "scatter.csv";
pub const CONFUSION_CSV: &str = "confusion.csv";

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn label(l: Option<Label>) -> &'static str {
    match l {
        Some(Label::Positive) => "pos",
        Some(Label::Negative) => "neg",
        None => "",
    }
}

fn status(s: ScanStatus) -> &'static str {
    match s {
        ScanStatus::Ok => "ok",
        ScanStatus::Failed => "failed",
        ScanStatus::Excluded => "excluded",
    }
}

fn flag_list(flags: &[Flag]) -> String {
    flags
        .iter()
        .map(|f| serde_json::to_value(f).expect("flag serializes").as_str().unwrap_or("").to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    w.write_record(header).map_err(ser)?;
    for r in rows {
        w.write_record(&r).map_err(ser)?;
    }
    w.into_inner().map_err(|e| Error::Serialize(e.to_string()))
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Per-scan table: one row per manifest record, blank cells for absent
/// values.
pub fn scans_csv(rows: &[ScanRow]) -> Result<Vec<u8>> {
    let mut header = strings(&[
        "scan_id",
        "dataset",
        "status",
        "error_kind",
        "error_message",
        "exclusion_reason",
        "measurement_mask",
        "expert_hu",
        "reference_label",
    ]);
    for m in Method::AUTOMATED {
        for suffix in ["hu", "label", "flags", "error"] {
            header.push(format!("{}_{suffix}", m.as_str()));
        }
    }
    header.extend(strings(&["dice", "jaccard", "hausdorff_mm", "assd_mm"]));
    let body = rows.iter().map(|r| {
        let mut out = vec![
            r.scan_id.clone(),
            r.dataset.clone(),
            status(r.status).to_string(),
            r.error.as_ref().map(|e| e.kind.clone()).unwrap_or_default(),
            r.error.as_ref().map(|e| e.message.clone()).unwrap_or_default(),
            r.exclusion_reason.clone().unwrap_or_default(),
            r.measurement_mask
                .map(|p| serde_json::to_value(p).expect("serializes").as_str().unwrap_or("").to_string())
                .unwrap_or_default(),
            num(r.expert_hu),
            label(r.reference_label).to_string(),
        ];
        for m in Method::AUTOMATED {
            let o = r.measurements.get(&m);
            out.push(num(o.and_then(|o| o.value_hu())));
            out.push(label(o.and_then(|o| o.label)).to_string());
            out.push(o.map(|o| flag_list(o.flags())).unwrap_or_default());
            out.push(
                o.and_then(|o| o.error.as_ref())
                    .map(|e| e.kind.clone())
                    .unwrap_or_default(),
            );
        }
        let s = r.segmentation;
        out.push(num(s.map(|s| s.dice)));
        out.push(num(s.map(|s| s.jaccard)));
        out.push(num(s.map(|s| s.hausdorff_mm)));
        out.push(num(s.map(|s| s.assd_mm)));
        out
    });
    csv_bytes(&header, body)
}

/// ROC vertices per method; each curve has one row per distinct threshold
/// plus the two endpoints (thresholds `inf` / `-inf`).
pub fn roc_csv(report: &CohortReport) -> Result<Vec<u8>> {
    let mut body = Vec::new();
    for (m, c) in &report.classification {
        if let Some(roc) = &c.roc {
            for p in &roc.curve {
                body.push(vec![
                    m.as_str().to_string(),
                    p.fpr.to_string(),
                    p.tpr.to_string(),
                    p.threshold.to_string(),
                ]);
            }
        }
    }
    csv_bytes(&strings(&["method", "fpr", "tpr", "threshold"]), body)
}

/// Long-format distributions for box plots: segmentation metrics per
/// dataset and attenuation per series.
pub fn boxplot_csv(rows: &[ScanRow]) -> Result<Vec<u8>> {
    let mut body = Vec::new();
    for r in rows.iter().filter(|r| r.status == ScanStatus::Ok) {
        let mut push = |metric: &str, v: Option<f64>| {
            if let Some(v) = v {
                body.push(vec![r.dataset.clone(), r.scan_id.clone(), metric.to_string(), v.to_string()]);
            }
        };
        let s = r.segmentation;
        push("dice", s.map(|s| s.dice));
        push("jaccard", s.map(|s| s.jaccard));
        push("hausdorff_mm", s.map(|s| s.hausdorff_mm));
        push("assd_mm", s.map(|s| s.assd_mm));
        push("expert_hu", r.expert_hu);
        for m in Method::AUTOMATED {
            push(&format!("{}_hu", m.as_str()), r.value(m));
        }
    }
    csv_bytes(&strings(&["dataset", "scan_id", "metric", "value"]), body)
}

/// Expert reading against each automated method, one row per scan.
pub fn scatter_csv(rows: &[ScanRow]) -> Result<Vec<u8>> {
    let mut header = strings(&["scan_id", "dataset", "expert_hu"]);
    header.extend(Method::AUTOMATED.iter().map(|m| m.as_str().to_string()));
    let body = rows
        .iter()
        .filter(|r| r.status == ScanStatus::Ok)
        .map(|r| {
            let mut out = vec![r.scan_id.clone(), r.dataset.clone(), num(r.expert_hu)];
            out.extend(Method::AUTOMATED.iter().map(|&m| num(r.value(m))));
            out
        });
    csv_bytes(&header, body)
}

pub fn confusion_csv(report: &CohortReport) -> Result<Vec<u8>> {
    let body = report.classification.iter().map(|(m, c)| {
        let roc = c.roc.as_ref();
        let q = roc.map(|r| r.confusion.as_quadruple());
        let cell = |i: usize| q.map(|q| q[i].to_string()).unwrap_or_default();
        vec![
            m.as_str().to_string(),
            report.config.threshold_hu.to_string(),
            cell(0),
            cell(1),
            cell(2),
            cell(3),
            num(roc.map(|r| r.sensitivity)),
            num(roc.map(|r| r.specificity)),
        ]
    });
    csv_bytes(
        &strings(&["method", "threshold_hu", "tp", "fp", "tn", "fn", "sensitivity", "specificity"]),
        body,
    )
}

pub fn report_json(report: &CohortReport) -> Result<Vec<u8>> {
    let mut bytes =
        serde_json::to_vec_pretty(report).map_err(|e| Error::Serialize(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Creates `dir` and checks it accepts files, so an unwritable target
/// fails before any work is done.
pub fn prepare_output_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".steatoscan-write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes every report file into `dir`. Everything is rendered in memory
/// first, and the aggregate JSON is written last.
pub fn emit_reports(report: &CohortReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    prepare_output_dir(dir)?;
    let files = [
        (SCANS_CSV, scans_csv(&report.rows)?),
        (ROC_CSV, roc_csv(report)?),
        (BOXPLOT_CSV, boxplot_csv(&report.rows)?),
        (SCATTER_CSV, scatter_csv(&report.rows)?),
        (CONFUSION_CSV, confusion_csv(report)?),
        (REPORT_JSON, report_json(report)?),
    ];
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}
