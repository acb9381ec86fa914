use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::manifest::Manifest;
use super::scan::{ErrorNote, ScanRow, ScanStatus};
use crate::attenuate::{circle_pixels, Label, Method};
use crate::statkit::{
    error_stats, icc_2_1, ks_normality, ks_two_sample, roc_analysis, spearman, summary, Direction,
    ErrorStats, IccResult, KsResult, PairedSeries, RatingsMatrix, RocResult, Summary,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Software {
    pub name: String,
    pub version: String,
}

impl Default for Software {
    fn default() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub manifest: usize,
    pub excluded: usize,
    pub failed: usize,
    pub succeeded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub scan_id: String,
    pub dataset: String,
    pub error: Option<ErrorNote>,
}

/// Mean and sample standard deviation of each segmentation metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummaries {
    pub dice: Summary,
    pub jaccard: Summary,
    pub hausdorff_mm: Summary,
    pub assd_mm: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationSection {
    pub total: MetricSummaries,
    pub by_dataset: BTreeMap<String, MetricSummaries>,
    /// Grouped by the reference steatosis label.
    pub by_label: BTreeMap<String, MetricSummaries>,
}

/// Expert reading against one automated method over scans having both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub n: usize,
    pub ks: Option<KsResult>,
    pub normality_expert: Option<KsResult>,
    pub normality_method: Option<KsResult>,
    pub spearman: Option<f64>,
    pub icc: Option<IccResult>,
    pub errors: Option<ErrorStats>,
    /// Why a statistic above is null.
    pub notes: BTreeMap<String, ErrorNote>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub n_positive: usize,
    pub n_negative: usize,
    pub roc: Option<RocResult>,
    pub error: Option<ErrorNote>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub a: String,
    pub b: String,
    pub n: usize,
    pub icc: Option<IccResult>,
    pub spearman: Option<f64>,
    pub notes: BTreeMap<String, ErrorNote>,
}

/// Agreement among several expert readers, and pairwise between every
/// reader and every automated method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderAgreement {
    pub readers: Vec<String>,
    /// Scans read by every reader.
    pub n_complete: usize,
    pub icc: Option<IccResult>,
    pub icc_error: Option<ErrorNote>,
    pub pairwise: Vec<PairAgreement>,
}

/// Conventions behind the numbers, echoed so readers need not guess.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub measurement_grid: String,
    pub surface_distance: String,
    pub confidence_intervals: String,
    pub operating_point: String,
    pub roi_area_cm2: f64,
}

impl Conventions {
    fn new(cfg: &RunConfig) -> Self {
        let (_, circle) = circle_pixels((0, 0), cfg.roi_radius_px, [1, 1, 1]);
        Self {
            measurement_grid: format!(
                "all measurements on the resampled {:?} mm grid",
                cfg.spacing
            ),
            surface_distance: "between centres of face-connected boundary voxels".into(),
            confidence_intervals: format!(
                "percentile bootstrap over cases, {} replicates, seed {}",
                cfg.bootstrap_reps, cfg.seed
            ),
            operating_point: format!("positive iff value <= {} HU", cfg.threshold_hu),
            roi_area_cm2: circle as f64 * cfg.spacing[0] * cfg.spacing[1] / 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub software: Software,
    pub config: RunConfig,
    pub conventions: Conventions,
    pub counts: Counts,
    pub exclusions: BTreeMap<String, usize>,
    pub failures: Vec<Failure>,
    pub segmentation: Option<SegmentationSection>,
    /// Keyed by `expert` and by method name.
    pub attenuation: BTreeMap<String, Option<Summary>>,
    pub comparisons: BTreeMap<Method, Comparison>,
    pub classification: BTreeMap<Method, Classification>,
    pub readers: Option<ReaderAgreement>,
    pub rows: Vec<ScanRow>,
}

fn label_name(l: Label) -> &'static str {
    match l {
        Label::Positive => "positive",
        Label::Negative => "negative",
    }
}

fn metric_summaries<'a>(rows: impl Iterator<Item = &'a ScanRow>) -> Option<MetricSummaries> {
    let metrics: Vec<_> = rows.filter_map(|r| r.segmentation).collect();
    if metrics.is_empty() {
        return None;
    }
    let of = |f: fn(&crate::segmetrics::SegmentationMetrics) -> f64| {
        summary(&metrics.iter().map(f).collect::<Vec<_>>()).expect("nonempty")
    };
    Some(MetricSummaries {
        dice: of(|m| m.dice),
        jaccard: of(|m| m.jaccard),
        hausdorff_mm: of(|m| m.hausdorff_mm),
        assd_mm: of(|m| m.assd_mm),
    })
}

fn segmentation_section(ok: &[&ScanRow]) -> Option<SegmentationSection> {
    let total = metric_summaries(ok.iter().copied())?;
    let mut by_dataset = BTreeMap::new();
    let mut by_label = BTreeMap::new();
    for r in ok {
        by_dataset.entry(r.dataset.clone()).or_insert(());
        if let Some(l) = r.reference_label {
            by_label.entry(label_name(l).to_string()).or_insert(());
        }
    }
    let by_dataset = by_dataset
        .into_keys()
        .filter_map(|d| {
            metric_summaries(ok.iter().copied().filter(|r| r.dataset == d)).map(|s| (d, s))
        })
        .collect();
    let by_label = by_label
        .into_keys()
        .filter_map(|name| {
            metric_summaries(
                ok.iter()
                    .copied()
                    .filter(|r| r.reference_label.map(label_name) == Some(name.as_str())),
            )
            .map(|s| (name, s))
        })
        .collect();
    Some(SegmentationSection {
        total,
        by_dataset,
        by_label,
    })
}

fn note<T>(notes: &mut BTreeMap<String, ErrorNote>, key: &str, r: Result<T>) -> Option<T> {
    r.map_err(|e| {
        notes.insert(key.to_string(), (&e).into());
    })
    .ok()
}

fn compare(ok: &[&ScanRow], method: Method, cfg: &RunConfig) -> Comparison {
    let (mut ids, mut expert, mut auto) = (Vec::new(), Vec::new(), Vec::new());
    for r in ok {
        if let (Some(e), Some(a)) = (r.expert_hu, r.value(method)) {
            ids.push(r.scan_id.clone());
            expert.push(e);
            auto.push(a);
        }
    }
    let mut notes = BTreeMap::new();
    let n = ids.len();
    let ks = note(&mut notes, "ks", ks_two_sample(&expert, &auto));
    let normality_expert = note(&mut notes, "normality_expert", ks_normality(&expert));
    let normality_method = note(&mut notes, "normality_method", ks_normality(&auto));
    let spearman = note(&mut notes, "spearman", spearman(&expert, &auto));
    let icc = note(
        &mut notes,
        "icc",
        RatingsMatrix::from_pairs(&expert, &auto).and_then(|m| icc_2_1(&m, &cfg.bootstrap())),
    );
    let errors = note(
        &mut notes,
        "errors",
        PairedSeries::new(ids, expert, auto).map(|p| error_stats(&p)),
    );
    Comparison {
        n,
        ks,
        normality_expert,
        normality_method,
        spearman,
        icc,
        errors,
        notes,
    }
}

fn classify(ok: &[&ScanRow], method: Method, cfg: &RunConfig) -> Classification {
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for r in ok {
        if let (Some(l), Some(v)) = (r.reference_label, r.value(method)) {
            scores.push(v);
            labels.push(l == Label::Positive);
        }
    }
    let n_positive = labels.iter().filter(|&&l| l).count();
    let result = roc_analysis(
        &scores,
        &labels,
        cfg.threshold_hu,
        Direction::Lower,
        Some(&cfg.bootstrap()),
    );
    Classification {
        n_positive,
        n_negative: labels.len() - n_positive,
        error: result.as_ref().err().map(Into::into),
        roc: result.ok(),
    }
}

fn reader_agreement(ok: &[&ScanRow], readers: &[String], cfg: &RunConfig) -> ReaderAgreement {
    let mut names = vec!["expert_hu".to_string()];
    names.extend(readers.iter().cloned());
    let expert_cols = names.len();
    names.extend(Method::AUTOMATED.iter().map(|m| m.as_str().to_string()));

    let column = |r: &ScanRow, c: usize| -> Option<f64> {
        match c {
            0 => r.expert_hu,
            c if c < expert_cols => r.extra_expert_hu[c - 1],
            c => r.value(Method::AUTOMATED[c - expert_cols]),
        }
    };

    let complete: Vec<Vec<f64>> = ok
        .iter()
        .filter_map(|r| (0..expert_cols).map(|c| column(r, c)).collect())
        .collect();
    let n_complete = complete.len();
    let matrix = RatingsMatrix::new(complete).and_then(|m| icc_2_1(&m, &cfg.bootstrap()));

    let mut pairwise = Vec::new();
    for a in 0..names.len() {
        for b in a + 1..names.len() {
            if a >= expert_cols {
                // method-vs-method pairs are outside the reader study
                continue;
            }
            let (mut xa, mut xb) = (Vec::new(), Vec::new());
            for r in ok {
                if let (Some(u), Some(v)) = (column(r, a), column(r, b)) {
                    xa.push(u);
                    xb.push(v);
                }
            }
            let mut notes = BTreeMap::new();
            pairwise.push(PairAgreement {
                a: names[a].clone(),
                b: names[b].clone(),
                n: xa.len(),
                icc: note(
                    &mut notes,
                    "icc",
                    RatingsMatrix::from_pairs(&xa, &xb).and_then(|m| icc_2_1(&m, &cfg.bootstrap())),
                ),
                spearman: note(&mut notes, "spearman", spearman(&xa, &xb)),
                notes,
            });
        }
    }
    ReaderAgreement {
        readers: names[..expert_cols].to_vec(),
        n_complete,
        icc_error: matrix.as_ref().err().map(Into::into),
        icc: matrix.ok(),
        pairwise,
    }
}

/// Builds the cohort report from per-scan rows. Rows are sorted by scan id
/// first so the report does not depend on processing order.
pub fn aggregate(mut rows: Vec<ScanRow>, manifest: &Manifest, cfg: &RunConfig) -> Result<CohortReport> {
    rows.sort_by(|a, b| a.scan_id.cmp(&b.scan_id));
    let count = |s: ScanStatus| rows.iter().filter(|r| r.status == s).count();
    let counts = Counts {
        manifest: manifest.records.len(),
        excluded: count(ScanStatus::Excluded),
        failed: count(ScanStatus::Failed),
        succeeded: count(ScanStatus::Ok),
    };
    if counts.excluded + counts.failed + counts.succeeded != counts.manifest {
        return Err(Error::Argument(format!(
            "{} rows for {} manifest records",
            rows.len(),
            counts.manifest
        )));
    }
    if counts.succeeded == 0 {
        return Err(Error::EmptyCohort);
    }

    let mut exclusions = BTreeMap::new();
    for r in &rows {
        if let Some(reason) = &r.exclusion_reason {
            *exclusions.entry(reason.clone()).or_insert(0) += 1;
        }
    }
    let failures = rows
        .iter()
        .filter(|r| r.status == ScanStatus::Failed)
        .map(|r| Failure {
            scan_id: r.scan_id.clone(),
            dataset: r.dataset.clone(),
            error: r.error.clone(),
        })
        .collect();

    let ok: Vec<&ScanRow> = rows.iter().filter(|r| r.status == ScanStatus::Ok).collect();
    let mut attenuation = BTreeMap::new();
    let expert: Vec<f64> = ok.iter().filter_map(|r| r.expert_hu).collect();
    attenuation.insert("expert".to_string(), summary(&expert).ok());
    for m in Method::AUTOMATED {
        let v: Vec<f64> = ok.iter().filter_map(|r| r.value(m)).collect();
        attenuation.insert(m.as_str().to_string(), summary(&v).ok());
    }

    let comparisons = Method::AUTOMATED
        .iter()
        .map(|&m| (m, compare(&ok, m, cfg)))
        .collect();
    let classification = Method::AUTOMATED
        .iter()
        .map(|&m| (m, classify(&ok, m, cfg)))
        .collect();
    let readers = (!manifest.extra_readers.is_empty())
        .then(|| reader_agreement(&ok, &manifest.extra_readers, cfg));

    Ok(CohortReport {
        software: Software::default(),
        config: cfg.clone(),
        conventions: Conventions::new(cfg),
        counts,
        exclusions,
        failures,
        segmentation: segmentation_section(&ok),
        attenuation,
        comparisons,
        classification,
        readers,
        rows,
    })
}
