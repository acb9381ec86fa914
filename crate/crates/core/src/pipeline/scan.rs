use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::manifest::ScanRecord;
use crate::attenuate::{
    classify_steatosis, measure_ai2d, measure_ai3d, measure_airoi, AttenuationMeasurement, Flag,
    Label, Method,
};
use crate::maskops::largest_component;
use crate::segmetrics::{segmentation_metrics, SegmentationMetrics};
use crate::volgrid::{
    load_mask, load_volume, resample_linear, resample_mask_nearest, CtVolume, LiverMask,
    Provenance,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanStatus {
    Ok,
    Failed,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorNote {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorNote {
    fn from(e: &Error) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

/// One method's outcome on one scan; `error` is set exactly when
/// `measurement` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub measurement: Option<AttenuationMeasurement>,
    pub label: Option<Label>,
    pub error: Option<ErrorNote>,
}

impl MethodOutcome {
    pub fn value_hu(&self) -> Option<f64> {
        self.measurement.as_ref().map(|m| m.value_hu)
    }

    pub fn flags(&self) -> &[Flag] {
        self.measurement.as_ref().map_or(&[], |m| &m.flags)
    }
}

/// Per-scan result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub scan_id: String,
    pub dataset: String,
    pub status: ScanStatus,
    pub error: Option<ErrorNote>,
    pub exclusion_reason: Option<String>,
    pub expert_hu: Option<f64>,
    pub extra_expert_hu: Vec<Option<f64>>,
    /// Manifest label, or the expert reading against the threshold when the
    /// manifest gives no label.
    pub reference_label: Option<Label>,
    /// Mask the attenuation methods ran on.
    pub measurement_mask: Option<Provenance>,
    pub measurements: BTreeMap<Method, MethodOutcome>,
    /// Model vs expert after postprocessing; absent unless both masks exist.
    pub segmentation: Option<SegmentationMetrics>,
    pub segmentation_error: Option<ErrorNote>,
}

impl ScanRow {
    fn skeleton(record: &ScanRecord, cfg: &RunConfig) -> Self {
        let reference_label = record.expert_label.or_else(|| {
            record.expert_hu.map(|hu| {
                if hu <= cfg.threshold_hu {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
        });
        Self {
            scan_id: record.scan_id.clone(),
            dataset: record.dataset.clone(),
            status: ScanStatus::Ok,
            error: None,
            exclusion_reason: record.exclusion.clone(),
            expert_hu: record.expert_hu,
            extra_expert_hu: record.extra_expert_hu.clone(),
            reference_label,
            measurement_mask: None,
            measurements: BTreeMap::new(),
            segmentation: None,
            segmentation_error: None,
        }
    }

    pub fn value(&self, method: Method) -> Option<f64> {
        self.measurements.get(&method).and_then(MethodOutcome::value_hu)
    }
}

/// Inputs of one scan on the working grid, ready for measurement.
#[derive(Debug, Clone)]
pub struct PreparedScan {
    pub volume: CtVolume,
    pub expert: Option<LiverMask>,
    /// Largest connected component of the resampled model mask.
    pub model: Option<LiverMask>,
}

impl PreparedScan {
    /// The postprocessed model mask when present, otherwise the expert mask.
    pub fn measurement_mask(&self) -> Option<&LiverMask> {
        self.model.as_ref().or(self.expert.as_ref())
    }
}

fn load_aligned(path: &std::path::Path, provenance: Provenance, native: &CtVolume) -> Result<LiverMask> {
    let mask = load_mask(path, provenance)?;
    mask.ensure_aligned_with(native)?;
    Ok(mask)
}

/// Loads, checks alignment on the native grid, resamples to the working
/// spacing and keeps the largest component of the model mask.
pub fn prepare_scan(record: &ScanRecord, cfg: &RunConfig) -> Result<PreparedScan> {
    let native = load_volume(&record.volume_path)?;
    let expert = record
        .expert_mask_path
        .as_deref()
        .map(|p| load_aligned(p, Provenance::Expert, &native))
        .transpose()?;
    let model = record
        .model_mask_path
        .as_deref()
        .map(|p| load_aligned(p, Provenance::Model, &native))
        .transpose()?;
    let volume = resample_linear(&native, cfg.spacing)?;
    let expert = expert
        .map(|m| resample_mask_nearest(&m, cfg.spacing))
        .transpose()?;
    let model = model
        .map(|m| resample_mask_nearest(&m, cfg.spacing).and_then(|m| largest_component(&m, cfg.connectivity)))
        .transpose()?;
    Ok(PreparedScan {
        volume,
        expert,
        model,
    })
}

/// All three automated measurements on `mask`, each failing independently.
pub fn measure_all(
    vol: &CtVolume,
    mask: &LiverMask,
    cfg: &RunConfig,
) -> BTreeMap<Method, MethodOutcome> {
    Method::AUTOMATED
        .iter()
        .map(|&method| {
            let result = match method {
                Method::AiRoi => measure_airoi(vol, mask, &cfg.roi_params()),
                Method::Ai3d => measure_ai3d(vol, mask),
                Method::Ai2d => measure_ai2d(vol, mask),
                Method::ExpertImport => unreachable!("not an automated method"),
            };
            let outcome = match result {
                Ok(m) => MethodOutcome {
                    label: Some(classify_steatosis(&m, cfg.threshold_hu).label),
                    measurement: Some(m),
                    error: None,
                },
                Err(e) => MethodOutcome {
                    measurement: None,
                    label: None,
                    error: Some((&e).into()),
                },
            };
            (method, outcome)
        })
        .collect()
}

/// Runs one manifest record end to end. Never fails: problems land in the
/// row's status and error fields.
pub fn run_scan(record: &ScanRecord, cfg: &RunConfig) -> ScanRow {
    let mut row = ScanRow::skeleton(record, cfg);
    if record.is_excluded() {
        row.status = ScanStatus::Excluded;
        return row;
    }
    let prepared = match prepare_scan(record, cfg) {
        Ok(p) => p,
        Err(e) => {
            row.status = ScanStatus::Failed;
            row.error = Some((&e).into());
            return row;
        }
    };
    let Some(mask) = prepared.measurement_mask() else {
        row.status = ScanStatus::Failed;
        row.error = Some((&Error::Argument("no liver mask given".into())).into());
        return row;
    };
    row.measurement_mask = Some(mask.provenance());
    row.measurements = measure_all(&prepared.volume, mask, cfg);
    if row.measurements.values().all(|o| o.measurement.is_none()) {
        row.status = ScanStatus::Failed;
        row.error = row.measurements.values().find_map(|o| o.error.clone());
    }
    if let (Some(model), Some(expert)) = (&prepared.model, &prepared.expert) {
        match segmentation_metrics(model, expert) {
            Ok(m) => row.segmentation = Some(m),
            Err(e) => row.segmentation_error = Some((&e).into()),
        }
    }
    row
}
