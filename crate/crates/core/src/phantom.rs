//! Synthetic CT phantoms and cohorts with planted liver attenuation.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::volgrid::{save_mask, save_volume, CtVolume, Grid, LiverMask, Provenance};
use crate::{Error, Result};

/// The eight public validation datasets, used as dataset labels.
pub const DATASETS: [&str; 8] = [
    "LIDC-IDRI",
    "NSCLC-Lung1",
    "RIDER",
    "VESSEL12",
    "RICORD-1A",
    "RICORD-1B",
    "COVID-19-Italy",
    "COVID-19-China",
];

/// Axis-aligned ellipsoid in voxel coordinates `(col, row, slice)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
}

impl Ellipsoid {
    pub fn contains(&self, i: usize, j: usize, k: usize) -> bool {
        let p = [i as f64, j as f64, k as f64];
        (0..3)
            .map(|a| ((p[a] - self.center[a]) / self.semi_axes[a]).powi(2))
            .sum::<f64>()
            <= 1.0
    }

    pub fn shrunk(&self, by: f64) -> Self {
        Self {
            center: self.center,
            semi_axes: self.semi_axes.map(|s| (s - by).max(0.5)),
        }
    }
}

pub fn ellipsoid_mask(grid: &Grid, e: &Ellipsoid, provenance: Provenance) -> Result<LiverMask> {
    LiverMask::from_fn(grid.clone(), provenance, |i, j, k| e.contains(i, j, k))
}

/// Solid cylinder along the slice axis at uniform HU, on a background of
/// `background_hu`.
pub fn cylinder(
    dims: [usize; 3],
    spacing: [f64; 3],
    center: (usize, usize),
    radius_px: f64,
    hu: f64,
    background_hu: f64,
) -> Result<(CtVolume, LiverMask)> {
    let grid = Grid::new(dims, spacing)?;
    let inside = |i: usize, j: usize| {
        let (dr, dc) = (j as f64 - center.0 as f64, i as f64 - center.1 as f64);
        dr * dr + dc * dc <= radius_px * radius_px
    };
    let vol = CtVolume::from_fn(grid.clone(), |i, j, _| {
        if inside(i, j) {
            hu
        } else {
            background_hu
        }
    })?;
    let mask = LiverMask::from_fn(grid, Provenance::Expert, |i, j, _| inside(i, j))?;
    Ok((vol, mask))
}

/// Uniform-HU ellipsoidal liver in air-like background.
pub fn uniform_liver(grid: &Grid, liver: &Ellipsoid, liver_hu: f64) -> Result<(CtVolume, LiverMask)> {
    let vol = CtVolume::from_fn(grid.clone(), |i, j, k| {
        if liver.contains(i, j, k) {
            liver_hu
        } else {
            -900.0
        }
    })?;
    Ok((vol, ellipsoid_mask(grid, liver, Provenance::Expert)?))
}

/// Random smooth HU field with a random ellipsoidal liver mask at the
/// working spacing. Liver geometry always leaves room for the default ROI.
pub fn random_phantom(seed: u64) -> Result<(CtVolume, LiverMask)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [
        rng.random_range(72..=96),
        rng.random_range(64..=88),
        rng.random_range(8..=14),
    ];
    let grid = Grid::new(dims, [0.7, 0.7, 2.5])?;

    // a few low-frequency waves plus white noise around a liver-like mean
    let base = rng.random_range(20.0..70.0);
    let waves: Vec<([f64; 3], f64, f64)> = (0..4)
        .map(|_| {
            (
                [
                    rng.random_range(0.0..0.3),
                    rng.random_range(0.0..0.3),
                    rng.random_range(0.0..0.8),
                ],
                rng.random_range(2.0..12.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let noise = Normal::new(0.0, 6.0).expect("valid sd");
    let vol = CtVolume::from_fn(grid.clone(), |i, j, k| {
        let p = [i as f64, j as f64, k as f64];
        let smooth: f64 = waves
            .iter()
            .map(|(f, amp, ph)| amp * (f[0] * p[0] + f[1] * p[1] + f[2] * p[2] + ph).cos())
            .sum();
        base + smooth + noise.sample(&mut rng)
    })?;

    let semi = [
        rng.random_range(26.0..(dims[0] as f64 / 2.0 - 2.0)),
        rng.random_range(20.0..(dims[1] as f64 / 2.0 - 2.0)),
        rng.random_range(dims[2] as f64 / 2.0..dims[2] as f64),
    ];
    let center = [
        dims[0] as f64 / 2.0 + rng.random_range(-1.5..1.5),
        dims[1] as f64 / 2.0 + rng.random_range(-1.5..1.5),
        dims[2] as f64 / 2.0 + rng.random_range(-1.0..1.0),
    ];
    let mask = ellipsoid_mask(
        &grid,
        &Ellipsoid {
            center,
            semi_axes: semi,
        },
        Provenance::Model,
    )?;
    Ok((vol, mask))
}

/// Ground truth for one synthetic scan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedScan {
    pub scan_id: String,
    pub dataset: String,
    /// HU of the whole liver region; every automated method measures it.
    pub planted_hu: f64,
    pub expert_hu: f64,
    pub expert_positive: bool,
    pub excluded: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub manifest: PathBuf,
    pub scans: Vec<PlantedScan>,
}

fn quarter(v: f64) -> f64 {
    (v * 4.0).round() / 4.0
}

/// Writes `n` synthetic scans plus a manifest under `dir`.
///
/// Each liver is uniform at its planted HU (a multiple of 0.25 so every
/// mean is exact), the expert mask is the liver ellipsoid and the model mask
/// is a slightly shrunk copy plus a detached spurious blob that the
/// largest-component step must remove. Expert readings are the planted
/// value plus reader noise; expert labels follow the 40 HU rule on the
/// expert reading. Roughly `prevalence` of livers are planted fatty.
pub fn write_synthetic_cohort(
    dir: impl AsRef<Path>,
    n: usize,
    prevalence: f64,
    seed: u64,
) -> Result<SyntheticCohort> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let healthy = Normal::<f64>::new(58.0, 8.0).expect("valid sd");
    let fatty = Normal::<f64>::new(30.0, 7.0).expect("valid sd");
    let reader = Normal::new(0.0, 2.5).expect("valid sd");

    let grid = Grid::new([64, 60, 14], [0.7, 0.7, 2.5])?;
    let mut scans = Vec::with_capacity(n);
    let mut manifest = String::from(
        "scan_id,dataset,volume_path,expert_mask_path,model_mask_path,expert_hu,expert_label,excluded,exclusion_reason\n",
    );
    for s in 0..n {
        let scan_id = format!("scan{s:04}");
        let dataset = DATASETS[s % DATASETS.len()].to_string();
        let fatty_liver = rng.random_bool(prevalence);
        let planted_hu = quarter(if fatty_liver {
            fatty.sample(&mut rng).min(38.0)
        } else {
            healthy.sample(&mut rng).max(42.0)
        });
        let expert_hu = quarter(planted_hu + reader.sample(&mut rng));
        let expert_positive = expert_hu <= 40.0;

        let liver = Ellipsoid {
            center: [33.0, 30.0, 6.5],
            semi_axes: [
                rng.random_range(24.0..27.0),
                rng.random_range(20.0..23.0),
                rng.random_range(8.0..10.0),
            ],
        };
        // model output: a slightly under-segmented liver plus a detached
        // false-positive blob in the corner
        let shrink = rng.random_range(0.0..1.5);
        let core = liver.shrunk(shrink);
        let model = LiverMask::from_fn(grid.clone(), Provenance::Model, |i, j, k| {
            core.contains(i, j, k) || (i <= 2 && j <= 2 && k <= 1)
        })?;
        let (vol, expert) = uniform_liver(&grid, &liver, planted_hu)?;

        let vol_file = format!("{scan_id}.nii.gz");
        let expert_file = format!("{scan_id}_expert.nii.gz");
        let model_file = format!("{scan_id}_model.nii.gz");
        save_volume(dir.join(&vol_file), &vol)?;
        save_mask(dir.join(&expert_file), &expert)?;
        save_mask(dir.join(&model_file), &model)?;

        manifest.push_str(&format!(
            "{scan_id},{dataset},{vol_file},{expert_file},{model_file},{expert_hu},{},false,\n",
            if expert_positive { "pos" } else { "neg" }
        ));
        scans.push(PlantedScan {
            scan_id,
            dataset,
            planted_hu,
            expert_hu,
            expert_positive,
            excluded: None,
        });
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(SyntheticCohort {
        manifest: path,
        scans,
    })
}
