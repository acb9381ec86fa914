//! `steatoscan`: liver attenuation measurement and validation reports from
//! CT volumes and liver masks.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use steatoscan_core::attenuate::{
    circle_pixels, classify_steatosis, place_rois, AttenuationMeasurement, Label, Method,
};
use steatoscan_core::maskops::{largest_component, Connectivity};
use steatoscan_core::phantom::write_synthetic_cohort;
use steatoscan_core::pipeline::{
    measure_all, prepare_scan, run_cohort, RunConfig, ScanRecord, REPORT_JSON,
};
use steatoscan_core::segmetrics::segmentation_metrics;
use steatoscan_core::volgrid::{load_mask, resample_mask_nearest, Provenance};
use steatoscan_core::{Error, Result};

const EXIT_PARTIAL: u8 = 1;
const EXIT_FATAL: u8 = 2;

#[derive(Parser)]
#[command(name = "steatoscan", version, about = "Automated CT liver attenuation and steatosis validation")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// TOML run configuration; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "HU")]
    threshold_hu: Option<f64>,
    #[arg(long, global = true, value_name = "PX")]
    roi_radius_px: Option<u32>,
    #[arg(long, global = true, value_name = "PX")]
    roi_offset_px: Option<u32>,
    /// Working grid spacing in mm (column, row, slice).
    #[arg(long, global = true, num_args = 3, value_names = ["X", "Y", "Z"])]
    spacing: Option<Vec<f64>>,
    /// Voxel connectivity for mask postprocessing: 6 or 26.
    #[arg(long, global = true)]
    connectivity: Option<Connectivity>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Scan-level worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    bootstrap_reps: Option<usize>,
}

impl GlobalOpts {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.threshold_hu {
            cfg.threshold_hu = v;
        }
        if let Some(v) = self.roi_radius_px {
            cfg.roi_radius_px = v;
        }
        if let Some(v) = self.roi_offset_px {
            cfg.roi_offset_px = v;
        }
        if let Some(v) = &self.spacing {
            cfg.spacing = [v[0], v[1], v[2]];
        }
        if let Some(v) = self.connectivity {
            cfg.connectivity = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = self.bootstrap_reps {
            cfg.bootstrap_reps = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ScanInputs {
    /// CT volume (NIfTI-1, optionally gzipped).
    #[arg(long)]
    volume: PathBuf,
    /// Expert liver mask.
    #[arg(long)]
    expert_mask: Option<PathBuf>,
    /// Model liver mask; reduced to its largest component before use.
    #[arg(long)]
    model_mask: Option<PathBuf>,
}

impl ScanInputs {
    fn record(&self) -> Result<ScanRecord> {
        if self.expert_mask.is_none() && self.model_mask.is_none() {
            return Err(Error::Argument(
                "give --expert-mask, --model-mask or both".into(),
            ));
        }
        Ok(ScanRecord {
            scan_id: self
                .volume
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            dataset: String::new(),
            volume_path: self.volume.clone(),
            expert_mask_path: self.expert_mask.clone(),
            model_mask_path: self.model_mask.clone(),
            expert_hu: None,
            extra_expert_hu: Vec::new(),
            expert_label: None,
            exclusion: None,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Measure one scan with all three methods and print JSON.
    Measure {
        #[command(flatten)]
        scan: ScanInputs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Overlap and surface-distance metrics between two masks.
    SegMetrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Keep only the largest component of the predicted mask first.
        #[arg(long)]
        postprocess: bool,
        /// Compare on the files' own grid instead of the working grid.
        #[arg(long)]
        native: bool,
    },
    /// Steatosis call from a value or a measurement JSON.
    Classify {
        #[arg(long, conflicts_with = "measurement", required_unless_present = "measurement")]
        value: Option<f64>,
        /// Output of `measure`, or a single measurement object.
        #[arg(long)]
        measurement: Option<PathBuf>,
        /// Method to read from a `measure` output.
        #[arg(long, default_value = "AI_ROI")]
        method: String,
    },
    /// Process a manifest and write every report.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// ROI geometry and covered pixels, for drawing overlays.
    RoiDebug {
        #[command(flatten)]
        scan: ScanInputs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic cohort with planted attenuation values.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        scans: usize,
        #[arg(long, default_value_t = 0.08)]
        prevalence: f64,
    },
}

fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Serialize(e.to_string()))
}

fn measure(cfg: &RunConfig, scan: &ScanInputs, out: Option<&Path>) -> Result<u8> {
    let prepared = prepare_scan(&scan.record()?, cfg)?;
    let mask = prepared.measurement_mask().expect("a mask was required");
    let outcomes = measure_all(&prepared.volume, mask, cfg);
    let failed = outcomes.values().filter(|o| o.measurement.is_none()).count();
    emit(
        &json!({
            "config": to_value(cfg)?,
            "measurement_mask": to_value(&mask.provenance())?,
            "measurements": to_value(&outcomes)?,
        }),
        out,
    )?;
    Ok(match failed {
        0 => 0,
        n if n == outcomes.len() => EXIT_FATAL,
        _ => EXIT_PARTIAL,
    })
}

fn seg_metrics(cfg: &RunConfig, pred: &Path, reference: &Path, postprocess: bool, native: bool) -> Result<u8> {
    let mut a = load_mask(pred, Provenance::Model)?;
    let mut b = load_mask(reference, Provenance::Expert)?;
    a.grid().ensure_aligned(b.grid())?;
    if !native {
        a = resample_mask_nearest(&a, cfg.spacing)?;
        b = resample_mask_nearest(&b, cfg.spacing)?;
    }
    if postprocess {
        a = largest_component(&a, cfg.connectivity)?;
    }
    let m = segmentation_metrics(&a, &b)?;
    emit(&to_value(&m)?, None)?;
    Ok(0)
}

fn read_value(path: &Path, method: &str) -> Result<(f64, Method)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::parse("measurement", e.to_string()))?;
    let single = if v.get("value_hu").is_some() {
        v
    } else {
        v.pointer(&format!("/measurements/{method}/measurement"))
            .filter(|m| !m.is_null())
            .cloned()
            .ok_or_else(|| Error::Argument(format!("no {method} measurement in {}", path.display())))?
    };
    let m: AttenuationMeasurement =
        serde_json::from_value(single).map_err(|e| Error::parse("measurement", e.to_string()))?;
    Ok((m.value_hu, m.method))
}

fn classify(cfg: &RunConfig, value: Option<f64>, file: Option<&Path>, method: &str) -> Result<u8> {
    let m = match (value, file) {
        (Some(v), _) => AttenuationMeasurement::expert(v)?,
        (None, Some(p)) => {
            let (v, method) = read_value(p, method)?;
            AttenuationMeasurement {
                method,
                ..AttenuationMeasurement::expert(v)?
            }
        }
        (None, None) => unreachable!("clap requires one"),
    };
    let call = classify_steatosis(&m, cfg.threshold_hu);
    let mut v = to_value(&call)?;
    v["positive"] = Value::Bool(call.label == Label::Positive);
    emit(&v, None)?;
    Ok(0)
}

fn run(cfg: &RunConfig, manifest: &Path, out: &Path) -> Result<u8> {
    let report = run_cohort(manifest, out, cfg)?;
    let c = report.counts;
    eprintln!(
        "{} scans: {} succeeded, {} failed, {} excluded; report in {}",
        c.manifest,
        c.succeeded,
        c.failed,
        c.excluded,
        out.join(REPORT_JSON).display()
    );
    for f in &report.failures {
        if let Some(e) = &f.error {
            eprintln!("  {} failed [{}]: {}", f.scan_id, e.kind, e.message);
        }
    }
    Ok(if c.failed > 0 { EXIT_PARTIAL } else { 0 })
}

fn roi_debug(cfg: &RunConfig, scan: &ScanInputs, out: Option<&Path>) -> Result<u8> {
    let prepared = prepare_scan(&scan.record()?, cfg)?;
    let mask = prepared.measurement_mask().expect("a mask was required");
    let set = place_rois(&prepared.volume, mask, &cfg.roi_params())?;
    let dims = prepared.volume.grid().dims();
    let rois: Vec<Value> = set
        .rois
        .iter()
        .map(|r| {
            let (pixels, _) = circle_pixels((r.row, r.col), r.radius_px, dims);
            let (inside, outside): (Vec<_>, Vec<_>) =
                pixels.into_iter().partition(|&(row, col)| mask.get(col, row, r.slice));
            let mut v = to_value(r)?;
            v["area_cm2"] = json!(r.area_cm2(prepared.volume.grid().spacing()));
            v["liver_pixels"] = json!(inside);
            v["non_liver_pixels"] = json!(outside);
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let mut by_slice = BTreeMap::new();
    for r in &set.rois {
        by_slice.insert(r.slice, r.col - cfg.roi_offset_px as usize);
    }
    emit(
        &json!({
            "dims": dims,
            "spacing": prepared.volume.grid().spacing(),
            "pixel_order": "row, col",
            "leftmost_col_by_slice": by_slice,
            "flags": to_value(&set.flags)?,
            "rois": rois,
        }),
        out,
    )?;
    Ok(0)
}

fn synth(cfg: &RunConfig, out: &Path, scans: usize, prevalence: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&prevalence) {
        return Err(Error::Argument(format!("prevalence {prevalence} outside [0, 1]")));
    }
    let cohort = write_synthetic_cohort(out, scans, prevalence, cfg.seed)?;
    eprintln!("wrote {} scans; manifest {}", cohort.scans.len(), cohort.manifest.display());
    Ok(0)
}

fn dispatch(cli: &Cli) -> Result<u8> {
    let cfg = cli.global.resolve()?;
    match &cli.command {
        Command::Measure { scan, out } => measure(&cfg, scan, out.as_deref()),
        Command::SegMetrics {
            pred,
            reference,
            postprocess,
            native,
        } => seg_metrics(&cfg, pred, reference, *postprocess, *native),
        Command::Classify {
            value,
            measurement,
            method,
        } => classify(&cfg, *value, measurement.as_deref(), method),
        Command::Run { manifest, out } => run(&cfg, manifest, out),
        Command::RoiDebug { scan, out } => roi_debug(&cfg, scan, out.as_deref()),
        Command::Synth {
            out,
            scans,
            prevalence,
        } => synth(&cfg, out, *scans, *prevalence),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error [{}]: {e}", e.kind());
            ExitCode::from(EXIT_FATAL)
        }
    }
}
