use rayon::prelude::*;

use super::grid::{CtVolume, Grid, LiverMask};
use crate::{Error, Result};

/// Working grid spacing in mm (col, row, slice).
pub const DEFAULT_SPACING: [f64; 3] = [0.7, 0.7, 2.5];

/// Relative spacing difference treated as "already on the target grid".
const SAME_SPACING_TOL: f64 = 1e-6;

/// Output grid for a spacing change plus the per-axis step, in input voxel
/// units, between consecutive output samples.
///
/// Output voxel `k` sits at physical offset `k * target` from the shared
/// origin, so its continuous input index is `k * target / spacing`. Axes
/// already at the target spacing to within single precision (the precision
/// NIfTI headers store) keep their samples untouched.
fn target_grid(grid: &Grid, target: [f64; 3]) -> Result<(Grid, [f64; 3])> {
    if target.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::Argument(format!(
            "target spacing must be finite and > 0, got {target:?}"
        )));
    }
    let spacing = grid.spacing();
    let dims = grid.dims();
    let mut out_dims = [0usize; 3];
    let mut step = [0f64; 3];
    let mut affine = grid.affine();
    for a in 0..3 {
        step[a] = target[a] / spacing[a];
        for row in affine.iter_mut() {
            row[a] *= step[a];
        }
        if (step[a] - 1.0).abs() <= SAME_SPACING_TOL {
            step[a] = 1.0;
            out_dims[a] = dims[a];
        } else {
            let extent = dims[a] as f64 * spacing[a];
            out_dims[a] = ((extent / target[a]).round() as usize).max(1);
        }
    }
    Ok((Grid::from_affine(out_dims, target, affine)?, step))
}

/// Lower sample index and fractional weight along one axis, clamped to the
/// input extent.
#[inline]
fn bracket(pos: f64, n: usize) -> (usize, usize, f64) {
    let max = (n - 1) as f64;
    let p = pos.clamp(0.0, max);
    let lo = p.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    (lo, hi, p - lo as f64)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 || a == b {
        return a;
    }
    let v = a + t * (b - a);
    v.clamp(a.min(b), a.max(b))
}

/// Trilinear resampling onto a new spacing.
pub fn resample_linear(vol: &CtVolume, target: [f64; 3]) -> Result<CtVolume> {
    let (grid, step) = target_grid(vol.grid(), target)?;
    if step == [1.0; 3] {
        return CtVolume::new(grid, vol.data().to_vec());
    }
    let src = vol.grid();
    let [sx, sy, sz] = src.dims();
    let [nx, ny, _] = grid.dims();
    let xs: Vec<_> = (0..nx).map(|i| bracket(i as f64 * step[0], sx)).collect();
    let ys: Vec<_> = (0..ny).map(|j| bracket(j as f64 * step[1], sy)).collect();
    let input = vol.data();
    let mut data = vec![0.0; grid.len()];
    data.par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(k, slice)| {
            let (z0, z1, tz) = bracket(k as f64 * step[2], sz);
            for (j, &(y0, y1, ty)) in ys.iter().enumerate() {
                for (i, &(x0, x1, tx)) in xs.iter().enumerate() {
                    let at = |x, y, z| input[src.index(x, y, z)];
                    let c00 = lerp(at(x0, y0, z0), at(x1, y0, z0), tx);
                    let c10 = lerp(at(x0, y1, z0), at(x1, y1, z0), tx);
                    let c01 = lerp(at(x0, y0, z1), at(x1, y0, z1), tx);
                    let c11 = lerp(at(x0, y1, z1), at(x1, y1, z1), tx);
                    let c0 = lerp(c00, c10, ty);
                    let c1 = lerp(c01, c11, ty);
                    slice[i + nx * j] = lerp(c0, c1, tz);
                }
            }
        });
    CtVolume::new(grid, data)
}

/// Nearest input index; exact half-way positions go to the higher index.
#[inline]
fn nearest(pos: f64, n: usize) -> usize {
    ((pos + 0.5).floor().max(0.0) as usize).min(n - 1)
}

/// Nearest-neighbour resampling that keeps the mask binary and produces the
/// same grid as [`resample_linear`] for the same input geometry.
pub fn resample_mask_nearest(mask: &LiverMask, target: [f64; 3]) -> Result<LiverMask> {
    let (grid, step) = target_grid(mask.grid(), target)?;
    if step == [1.0; 3] {
        return Ok(mask.with_grid(grid, mask.data().to_vec()));
    }
    let src = mask.grid();
    let [sx, sy, sz] = src.dims();
    let [nx, ny, nz] = grid.dims();
    let xs: Vec<_> = (0..nx).map(|i| nearest(i as f64 * step[0], sx)).collect();
    let ys: Vec<_> = (0..ny).map(|j| nearest(j as f64 * step[1], sy)).collect();
    let zs: Vec<_> = (0..nz).map(|k| nearest(k as f64 * step[2], sz)).collect();
    let input = mask.data();
    let mut data = Vec::with_capacity(grid.len());
    for &z in &zs {
        for &y in &ys {
            for &x in &xs {
                data.push(input[src.index(x, y, z)]);
            }
        }
    }
    Ok(mask.with_grid(grid, data))
}
