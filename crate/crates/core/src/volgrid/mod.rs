//! Volumetric CT grids, NIfTI I/O, resampling and intensity windowing.

mod grid;
pub mod nifti;
mod resample;

pub use grid::{CtVolume, Grid, LiverMask, NormalizedVolume, Provenance, CANONICAL_AXES};
pub use nifti::{load_mask, load_volume, save_mask, save_volume};
pub use resample::{resample_linear, resample_mask_nearest, DEFAULT_SPACING};

use crate::{Error, Result};

pub const DEFAULT_WINDOW: (f64, f64) = (-200.0, 250.0);

/// Clamps HU to `[lo, hi]` and maps the window linearly onto `[0, 1]`.
pub fn window_rescale(vol: &CtVolume, lo: f64, hi: f64) -> Result<NormalizedVolume> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Argument(format!(
            "window requires lo < hi, got [{lo}, {hi}]"
        )));
    }
    let width = hi - lo;
    let data = vol
        .data()
        .iter()
        .map(|&v| {
            if v <= lo {
                0.0
            } else if v >= hi {
                1.0
            } else {
                ((v - lo) / width).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(NormalizedVolume::new_unchecked(vol.grid().clone(), data))
}
