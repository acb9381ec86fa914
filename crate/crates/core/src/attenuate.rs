//! Automated liver attenuation measurements and the steatosis call.
//!
//! All three measurements expect the resampled working grid
//! (0.7 x 0.7 x 2.5 mm), where the pixel-unit ROI geometry below covers the
//! intended physical area and 5 mm spans two slices.

use serde::{Deserialize, Serialize};

use crate::maskops::largest_area_slice;
use crate::volgrid::{CtVolume, LiverMask};
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD_HU: f64 = 40.0;
pub const DEFAULT_ROI_RADIUS_PX: u32 = 10;
pub const DEFAULT_ROI_OFFSET_PX: u32 = 30;
pub const DEFAULT_NEIGHBOR_MM: f64 = 5.0;
/// ROIs with less liver coverage than this are flagged.
pub const MIN_ROI_COVERAGE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "AI_ROI")]
    AiRoi,
    #[serde(rename = "AI_3D")]
    Ai3d,
    #[serde(rename = "AI_2D")]
    Ai2d,
    #[serde(rename = "EXPERT_IMPORT")]
    ExpertImport,
}

impl Method {
    pub const AUTOMATED: [Method; 3] = [Method::AiRoi, Method::Ai3d, Method::Ai2d];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::AiRoi => "AI_ROI",
            Method::Ai3d => "AI_3D",
            Method::Ai2d => "AI_2D",
            Method::ExpertImport => "EXPERT_IMPORT",
        }
    }
}

/// Quality and degradation markers attached to a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// An ROI covers less than [`MIN_ROI_COVERAGE`] of its circle with liver.
    LowCoverage,
    /// A neighbour slice fell outside the volume and was clamped inward.
    NeighborClamped,
    /// A neighbour ROI was dropped (no mask pixels on its slice, no liver
    /// inside its circle, or clamping collapsed it onto another level).
    NeighborSkipped,
    /// The neighbour distance rounded to zero slices and was raised to one.
    NeighborDistanceRaised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiPlacement {
    pub slice: usize,
    pub row: usize,
    pub col: usize,
    pub radius_px: u32,
    /// Pixels inside the full circle, including any beyond the image edge.
    pub circle_px: usize,
    /// Pixels inside both the circle and the liver mask.
    pub liver_px: usize,
    pub coverage: f64,
    pub mean_hu: f64,
}

impl RoiPlacement {
    /// Physical area of the full circle in cm^2.
    pub fn area_cm2(&self, spacing: [f64; 3]) -> f64 {
        self.circle_px as f64 * spacing[0] * spacing[1] / 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttenuationMeasurement {
    pub method: Method,
    pub value_hu: f64,
    pub slices: Vec<usize>,
    pub rois: Vec<RoiPlacement>,
    /// Voxels (or pixels) aggregated into the value.
    pub count: usize,
    /// AI-ROI only: mean over all ROI pixels pooled together, the
    /// alternative to averaging the per-ROI means.
    pub pooled_hu: Option<f64>,
    pub flags: Vec<Flag>,
}

impl AttenuationMeasurement {
    pub fn expert(value_hu: f64) -> Result<Self> {
        if !value_hu.is_finite() {
            return Err(Error::Argument(format!("expert HU {value_hu} is not finite")));
        }
        Ok(Self {
            method: Method::ExpertImport,
            value_hu,
            slices: Vec::new(),
            rois: Vec::new(),
            count: 1,
            pooled_hu: None,
            flags: Vec::new(),
        })
    }

    pub fn is_degraded(&self) -> bool {
        !self.flags.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteatosisCall {
    pub label: Label,
    pub threshold_hu: f64,
    pub method: Method,
    pub value_hu: f64,
}

fn check_inputs(vol: &CtVolume, mask: &LiverMask) -> Result<()> {
    mask.ensure_aligned_with(vol)?;
    if mask.is_empty() {
        return Err(Error::EmptyMask("liver mask has no voxels".into()));
    }
    Ok(())
}

/// Mean and count. Deviations are summed around the first value, which keeps
/// constant inputs exact and limits cancellation for offset data.
fn mean_over(mut values: impl Iterator<Item = f64>) -> Option<(f64, usize)> {
    let first = values.next()?;
    let (dev, n) = values.fold((0.0, 1usize), |(s, n), v| (s + (v - first), n + 1));
    Some((first + dev / n as f64, n))
}

/// Mean HU over every mask voxel.
pub fn measure_ai3d(vol: &CtVolume, mask: &LiverMask) -> Result<AttenuationMeasurement> {
    check_inputs(vol, mask)?;
    let (value_hu, count) = mean_over(
        vol.data()
            .iter()
            .zip(mask.data())
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v),
    )
    .expect("mask checked nonempty");
    Ok(AttenuationMeasurement {
        method: Method::Ai3d,
        value_hu,
        slices: Vec::new(),
        rois: Vec::new(),
        count,
        pooled_hu: None,
        flags: Vec::new(),
    })
}

/// Mean HU over the mask pixels of the largest-area axial slice.
pub fn measure_ai2d(vol: &CtVolume, mask: &LiverMask) -> Result<AttenuationMeasurement> {
    check_inputs(vol, mask)?;
    let k = largest_area_slice(mask)?;
    let n = vol.grid().slice_len();
    let range = k * n..(k + 1) * n;
    let (value_hu, count) = mean_over(
        vol.data()[range.clone()]
            .iter()
            .zip(&mask.data()[range])
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v),
    )
    .expect("largest slice is nonempty");
    Ok(AttenuationMeasurement {
        method: Method::Ai2d,
        value_hu,
        slices: vec![k],
        rois: Vec::new(),
        count,
        pooled_hu: None,
        flags: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiParams {
    pub radius_px: u32,
    pub offset_px: u32,
    pub neighbor_mm: f64,
}

impl Default for RoiParams {
    fn default() -> Self {
        Self {
            radius_px: DEFAULT_ROI_RADIUS_PX,
            offset_px: DEFAULT_ROI_OFFSET_PX,
            neighbor_mm: DEFAULT_NEIGHBOR_MM,
        }
    }
}

impl RoiParams {
    fn validate(&self) -> Result<()> {
        if self.radius_px == 0 {
            return Err(Error::Argument("ROI radius must be > 0 px".into()));
        }
        if !(self.neighbor_mm.is_finite() && self.neighbor_mm > 0.0) {
            return Err(Error::Argument(format!(
                "neighbour distance must be > 0 mm, got {}",
                self.neighbor_mm
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoiSet {
    /// Centre slice first, then the inferior and superior neighbours that
    /// survived.
    pub rois: Vec<RoiPlacement>,
    pub flags: Vec<Flag>,
}

/// Leftmost mask pixel of an axial slice as `(row, col)`: the minimum
/// column, and among pixels sharing it the lower median row.
pub fn leftmost_pixel(mask: &LiverMask, slice: usize) -> Option<(usize, usize)> {
    let grid = mask.grid();
    let [nx, ny, _] = grid.dims();
    for col in 0..nx {
        let rows: Vec<usize> = (0..ny).filter(|&row| mask.get(col, row, slice)).collect();
        if !rows.is_empty() {
            return Some((rows[(rows.len() - 1) / 2], col));
        }
    }
    None
}

/// Circle pixels as `(row, col)` within the image, plus the full circle's
/// pixel count.
pub fn circle_pixels(
    center: (usize, usize),
    radius_px: u32,
    dims: [usize; 3],
) -> (Vec<(usize, usize)>, usize) {
    let r = radius_px as i64;
    let (cr, cc) = (center.0 as i64, center.1 as i64);
    let mut inside = Vec::new();
    let mut total = 0;
    for dr in -r..=r {
        for dc in -r..=r {
            if dr * dr + dc * dc > r * r {
                continue;
            }
            total += 1;
            let (row, col) = (cr + dr, cc + dc);
            if row >= 0 && col >= 0 && (row as usize) < dims[1] && (col as usize) < dims[0] {
                inside.push((row as usize, col as usize));
            }
        }
    }
    (inside, total)
}

fn place_on_slice(
    vol: &CtVolume,
    mask: &LiverMask,
    slice: usize,
    params: &RoiParams,
) -> Option<RoiPlacement> {
    let (row, left) = leftmost_pixel(mask, slice)?;
    let col = left + params.offset_px as usize;
    let dims = vol.grid().dims();
    let (pixels, circle_px) = circle_pixels((row, col), params.radius_px, dims);
    let (mean_hu, liver_px) = mean_over(
        pixels
            .iter()
            .filter(|&&(r, c)| mask.get(c, r, slice))
            .map(|&(r, c)| vol.get(c, r, slice)),
    )?;
    Some(RoiPlacement {
        slice,
        row,
        col,
        radius_px: params.radius_px,
        circle_px,
        liver_px,
        coverage: liver_px as f64 / circle_px as f64,
        mean_hu,
    })
}

/// Places the circular ROIs on the largest-area slice and its two
/// neighbours `round(neighbor_mm / slice_spacing)` slices away.
pub fn place_rois(vol: &CtVolume, mask: &LiverMask, params: &RoiParams) -> Result<RoiSet> {
    params.validate()?;
    check_inputs(vol, mask)?;
    let grid = vol.grid();
    let nz = grid.dims()[2];
    let center = largest_area_slice(mask)?;
    let mut flags = Vec::new();

    let mut gap = (params.neighbor_mm / grid.spacing()[2]).round() as usize;
    if gap == 0 {
        gap = 1;
        flags.push(Flag::NeighborDistanceRaised);
    }

    let center_roi = place_on_slice(vol, mask, center, params).ok_or_else(|| {
        Error::Placement(format!(
            "ROI circle on centre slice {center} contains no liver pixels"
        ))
    })?;
    let mut rois = vec![center_roi];

    let below = center as isize - gap as isize;
    let above = center + gap;
    for wanted in [below, above as isize] {
        let clamped = wanted.clamp(0, nz as isize - 1) as usize;
        if clamped as isize != wanted {
            flags.push(Flag::NeighborClamped);
        }
        if rois.iter().any(|r| r.slice == clamped) {
            flags.push(Flag::NeighborSkipped);
            continue;
        }
        match place_on_slice(vol, mask, clamped, params) {
            Some(roi) => rois.push(roi),
            None => flags.push(Flag::NeighborSkipped),
        }
    }

    if rois.iter().any(|r| r.coverage < MIN_ROI_COVERAGE) {
        flags.push(Flag::LowCoverage);
    }
    flags.sort();
    flags.dedup();
    Ok(RoiSet { rois, flags })
}

/// Mean of the per-ROI means over circle-and-mask pixels.
pub fn measure_airoi(
    vol: &CtVolume,
    mask: &LiverMask,
    params: &RoiParams,
) -> Result<AttenuationMeasurement> {
    let RoiSet { rois, flags } = place_rois(vol, mask, params)?;
    let (value_hu, _) = mean_over(rois.iter().map(|r| r.mean_hu)).expect("at least one ROI");
    let count: usize = rois.iter().map(|r| r.liver_px).sum();
    let base = rois[0].mean_hu;
    let pooled_hu = base
        + rois
            .iter()
            .map(|r| (r.mean_hu - base) * r.liver_px as f64)
            .sum::<f64>()
            / count as f64;
    Ok(AttenuationMeasurement {
        method: Method::AiRoi,
        value_hu,
        slices: rois.iter().map(|r| r.slice).collect(),
        rois,
        count,
        pooled_hu: Some(pooled_hu),
        flags,
    })
}

/// Positive iff the value is at or below the threshold.
pub fn classify_steatosis(m: &AttenuationMeasurement, threshold_hu: f64) -> SteatosisCall {
    SteatosisCall {
        label: if m.value_hu <= threshold_hu {
            Label::Positive
        } else {
            Label::Negative
        },
        threshold_hu,
        method: m.method,
        value_hu: m.value_hu,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volgrid::{Grid, Provenance};

    fn grid(dims: [usize; 3]) -> Grid {
        Grid::new(dims, [0.7, 0.7, 2.5]).unwrap()
    }

    #[test]
    fn constant_volume_gives_the_constant_everywhere() {
        let g = grid([80, 80, 7]);
        let vol = CtVolume::new(g.clone(), vec![55.0; g.len()]).unwrap();
        let mask = LiverMask::from_fn(g, Provenance::Expert, |i, j, _| {
            let (di, dj) = (i as f64 - 40.0, j as f64 - 40.0);
            di * di + dj * dj <= 30.0 * 30.0
        })
        .unwrap();
        for m in [
            measure_ai3d(&vol, &mask).unwrap(),
            measure_ai2d(&vol, &mask).unwrap(),
            measure_airoi(&vol, &mask, &RoiParams::default()).unwrap(),
        ] {
            assert_eq!(m.value_hu, 55.0);
        }
    }

    #[test]
    fn two_voxel_mean() {
        let g = grid([2, 1, 1]);
        let vol = CtVolume::new(g.clone(), vec![30.0, 50.0]).unwrap();
        let mask = LiverMask::new(g, vec![true, true], Provenance::Expert).unwrap();
        let m = measure_ai3d(&vol, &mask).unwrap();
        assert_eq!(m.value_hu, 40.0);
        assert_eq!(m.count, 2);
    }

    #[test]
    fn ai2d_uses_the_largest_slice() {
        let g = grid([3, 1, 2]);
        let vol = CtVolume::new(g.clone(), vec![0.0, 0.0, 0.0, 10.0, 20.0, 30.0]).unwrap();
        let mask = LiverMask::new(g, vec![true, false, false, true, true, true], Provenance::Expert)
            .unwrap();
        let m = measure_ai2d(&vol, &mask).unwrap();
        assert_eq!(m.value_hu, 20.0);
        assert_eq!(m.slices, vec![1]);
    }

    #[test]
    fn empty_or_misaligned_inputs_fail() {
        let g = grid([2, 2, 2]);
        let vol = CtVolume::new(g.clone(), vec![0.0; 8]).unwrap();
        let empty = LiverMask::new(g, vec![false; 8], Provenance::Expert).unwrap();
        assert!(matches!(measure_ai3d(&vol, &empty), Err(Error::EmptyMask(_))));
        let other = LiverMask::new(grid([2, 2, 3]), vec![true; 12], Provenance::Expert).unwrap();
        assert!(matches!(measure_ai2d(&vol, &other), Err(Error::Alignment(_))));
    }

    #[test]
    fn roi_center_is_offset_from_leftmost_pixel() {
        let g = grid([100, 100, 1]);
        let vol = CtVolume::new(g.clone(), vec![50.0; g.len()]).unwrap();
        let mask = LiverMask::from_fn(g, Provenance::Model, |i, j, _| {
            (20..90).contains(&i) && (60..=60).contains(&j) || (25..90).contains(&i) && (40..80).contains(&j)
        })
        .unwrap();
        assert_eq!(leftmost_pixel(&mask, 0), Some((60, 20)));
        let set = place_rois(&vol, &mask, &RoiParams::default()).unwrap();
        assert_eq!((set.rois[0].row, set.rois[0].col), (60, 50));
    }

    #[test]
    fn leftmost_tie_takes_the_median_row() {
        let g = grid([10, 10, 1]);
        let mask = LiverMask::from_fn(g, Provenance::Model, |i, j, _| i == 2 && (3..=6).contains(&j))
            .unwrap();
        // rows 3,4,5,6: lower median is 4
        assert_eq!(leftmost_pixel(&mask, 0), Some((4, 2)));
    }

    #[test]
    fn circle_of_radius_ten_has_317_pixels() {
        let (inside, total) = circle_pixels((50, 50), 10, [100, 100, 1]);
        assert_eq!(total, 317);
        assert_eq!(inside.len(), 317);
        let (clipped, total) = circle_pixels((0, 0), 10, [100, 100, 1]);
        assert_eq!(total, 317);
        assert!(clipped.len() < 317);
    }

    #[test]
    fn circle_outside_liver_is_a_placement_error() {
        let g = grid([100, 10, 1]);
        let vol = CtVolume::new(g.clone(), vec![0.0; g.len()]).unwrap();
        // a thin liver column: the ROI lands 30 px right of it, on background
        let mask = LiverMask::from_fn(g, Provenance::Model, |i, _, _| i == 5).unwrap();
        assert!(matches!(
            place_rois(&vol, &mask, &RoiParams::default()),
            Err(Error::Placement(_))
        ));
    }

    #[test]
    fn neighbours_outside_volume_are_clamped_or_skipped() {
        let g = grid([80, 80, 3]);
        let vol = CtVolume::new(g.clone(), vec![50.0; g.len()]).unwrap();
        let mask = LiverMask::from_fn(g, Provenance::Model, |i, j, k| {
            let r = if k == 1 { 30.0 } else { 25.0 };
            let (di, dj) = (i as f64 - 40.0, j as f64 - 40.0);
            di * di + dj * dj <= r * r
        })
        .unwrap();
        let set = place_rois(&vol, &mask, &RoiParams::default()).unwrap();
        let slices: Vec<_> = set.rois.iter().map(|r| r.slice).collect();
        assert_eq!(slices, vec![1, 0, 2]);
        assert!(set.flags.contains(&Flag::NeighborClamped));

        let m = measure_airoi(&vol, &mask, &RoiParams::default()).unwrap();
        assert!(m.is_degraded());
        assert_eq!(m.value_hu, 50.0);
    }

    #[test]
    fn classification_boundary_is_inclusive() {
        let m = |v| AttenuationMeasurement::expert(v).unwrap();
        assert_eq!(classify_steatosis(&m(40.0), 40.0).label, Label::Positive);
        assert_eq!(classify_steatosis(&m(56.33), 40.0).label, Label::Negative);
        assert_eq!(classify_steatosis(&m(40.000001), 40.0).label, Label::Negative);
    }

    #[test]
    fn zero_radius_is_rejected() {
        let g = grid([4, 4, 1]);
        let vol = CtVolume::new(g.clone(), vec![0.0; 16]).unwrap();
        let mask = LiverMask::new(g, vec![true; 16], Provenance::Model).unwrap();
        let p = RoiParams {
            radius_px: 0,
            ..RoiParams::default()
        };
        assert!(matches!(place_rois(&vol, &mask, &p), Err(Error::Argument(_))));
    }
}
