//! Batch orchestration: manifest in, per-scan rows, cohort statistics and
//! report files out.

mod aggregate;
mod config;
mod manifest;
mod report;
mod scan;

use std::path::Path;

use rayon::prelude::*;

pub use aggregate::{
    aggregate, Classification, CohortReport, Comparison, Conventions, Counts, Failure,
    MetricSummaries, PairAgreement, ReaderAgreement, SegmentationSection, Software,
};
pub use config::{RunConfig, CONFIG_VERSION};
pub use manifest::{load_manifest, parse_manifest, Manifest, ScanRecord};
pub use report::{
    boxplot_csv, confusion_csv, emit_reports, prepare_output_dir, report_json, roc_csv,
    scans_csv, scatter_csv, BOXPLOT_CSV, CONFUSION_CSV, REPORT_JSON, ROC_CSV, SCANS_CSV,
    SCATTER_CSV,
};
pub use scan::{
    measure_all, prepare_scan, run_scan, ErrorNote, MethodOutcome, PreparedScan, ScanRow,
    ScanStatus,
};

use crate::{Error, Result};

/// Runs every manifest record on a pool of `cfg.workers` threads and
/// aggregates the rows.
pub fn run_manifest(manifest: &Manifest, cfg: &RunConfig) -> Result<CohortReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| {
        let rows: Vec<ScanRow> = manifest
            .records
            .par_iter()
            .map(|r| run_scan(r, cfg))
            .collect();
        aggregate(rows, manifest, cfg)
    })
}

/// `load_manifest`, `run_manifest` and `emit_reports` in one call. The output
/// directory is checked for writability before any scan is processed.
pub fn run_cohort(
    manifest_path: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    cfg: &RunConfig,
) -> Result<CohortReport> {
    let manifest = load_manifest(manifest_path)?;
    prepare_output_dir(out_dir.as_ref())?;
    let report = run_manifest(&manifest, cfg)?;
    emit_reports(&report, out_dir)?;
    Ok(report)
}
