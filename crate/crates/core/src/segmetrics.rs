//! Overlap and surface-distance metrics between two aligned masks.
//!
//! Surface distances are measured between voxel centres of surface voxels
//! (face-connectivity boundary, array edges included), in millimetres with
//! the grid's anisotropic spacing. Nearest distances come from an exact
//! separable squared Euclidean distance transform of the other surface.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::maskops::is_surface;
use crate::volgrid::{Grid, LiverMask};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationMetrics {
    pub dice: f64,
    pub jaccard: f64,
    pub hausdorff_mm: f64,
    pub assd_mm: f64,
}

/// Voxel counts behind the overlap metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlapCounts {
    pub a: u64,
    pub b: u64,
    pub intersection: u64,
}

impl OverlapCounts {
    pub fn union(&self) -> u64 {
        self.a + self.b - self.intersection
    }
}

pub fn overlap_counts(a: &LiverMask, b: &LiverMask) -> Result<OverlapCounts> {
    a.grid().ensure_aligned(b.grid())?;
    let mut counts = OverlapCounts {
        a: 0,
        b: 0,
        intersection: 0,
    };
    for (&x, &y) in a.data().iter().zip(b.data()) {
        counts.a += x as u64;
        counts.b += y as u64;
        counts.intersection += (x && y) as u64;
    }
    Ok(counts)
}

/// `(dice, jaccard)`. One empty mask scores zero; both empty is undefined.
pub fn overlap_metrics(a: &LiverMask, b: &LiverMask) -> Result<(f64, f64)> {
    let c = overlap_counts(a, b)?;
    if c.a + c.b == 0 {
        return Err(Error::UndefinedMetric(
            "overlap of two empty masks".into(),
        ));
    }
    let dice = (2 * c.intersection) as f64 / (c.a + c.b) as f64;
    let jaccard = c.intersection as f64 / c.union() as f64;
    Ok((dice, jaccard))
}

/// Lower envelope of parabolas `(x - pos[p])^2 + f[p]` sampled at every
/// `pos[q]`. Infinite entries are not features.
fn edt_1d(f: &[f64], pitch: f64, out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    let pos = |i: usize| i as f64 * pitch;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let s = ((f[q] + pos(q) * pos(q)) - (f[p] + pos(p) * pos(p)))
                        / (2.0 * (pos(q) - pos(p)));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut j = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let x = pos(q);
        while j + 1 < v.len() && z[j + 1] < x {
            j += 1;
        }
        let d = x - pos(v[j]);
        *o = d * d + f[v[j]];
    }
}

/// Squared distance in mm^2 from every voxel centre to the nearest feature.
pub fn squared_distance_transform(grid: &Grid, features: &[bool]) -> Vec<f64> {
    let [nx, ny, nz] = grid.dims();
    let [sx, sy, sz] = grid.spacing();
    let mut d: Vec<f64> = features
        .iter()
        .map(|&f| if f { 0.0 } else { f64::INFINITY })
        .collect();

    // along columns: contiguous rows of length nx
    d.par_chunks_mut(nx).for_each(|line| {
        let (mut v, mut z) = (Vec::new(), Vec::new());
        let src = line.to_vec();
        edt_1d(&src, sx, line, &mut v, &mut z);
    });

    // along rows, one slice at a time
    d.par_chunks_mut(nx * ny).for_each(|slice| {
        let (mut v, mut z) = (Vec::new(), Vec::new());
        let mut src = vec![0.0; ny];
        let mut dst = vec![0.0; ny];
        for i in 0..nx {
            for j in 0..ny {
                src[j] = slice[i + nx * j];
            }
            edt_1d(&src, sy, &mut dst, &mut v, &mut z);
            for j in 0..ny {
                slice[i + nx * j] = dst[j];
            }
        }
    });

    // along slices
    let plane = nx * ny;
    let columns: Vec<Vec<f64>> = (0..plane)
        .into_par_iter()
        .map(|p| {
            let (mut v, mut z) = (Vec::new(), Vec::new());
            let src: Vec<f64> = (0..nz).map(|k| d[p + plane * k]).collect();
            let mut dst = vec![0.0; nz];
            edt_1d(&src, sz, &mut dst, &mut v, &mut z);
            dst
        })
        .collect();
    for (p, col) in columns.into_iter().enumerate() {
        for (k, val) in col.into_iter().enumerate() {
            d[p + plane * k] = val;
        }
    }
    d
}

fn surface_mask(mask: &LiverMask) -> Vec<bool> {
    let grid = mask.grid();
    let data = mask.data();
    (0..data.len())
        .map(|v| data[v] && is_surface(grid, data, grid.coords(v)))
        .collect()
}

/// Nearest-surface distances from each surface voxel of `from` to the
/// surface of `to`, in raster order of `from`'s surface.
fn directed_distances(grid: &Grid, from: &[bool], to: &[bool]) -> Vec<f64> {
    let dt = squared_distance_transform(grid, to);
    from.iter()
        .zip(&dt)
        .filter(|(&s, _)| s)
        .map(|(_, &d2)| d2.sqrt())
        .collect()
}

/// `(hausdorff_mm, assd_mm)` between the two mask surfaces.
pub fn surface_distances(a: &LiverMask, b: &LiverMask) -> Result<(f64, f64)> {
    a.grid().ensure_aligned(b.grid())?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMask(
            "surface distances need two nonempty masks".into(),
        ));
    }
    let grid = a.grid();
    let sa = surface_mask(a);
    let sb = surface_mask(b);
    let (ab, ba) = rayon::join(
        || directed_distances(grid, &sa, &sb),
        || directed_distances(grid, &sb, &sa),
    );
    let hausdorff = ab.iter().chain(&ba).fold(0.0f64, |m, &d| m.max(d));
    let sum: f64 = ab.iter().chain(&ba).sum();
    let assd = sum / (ab.len() + ba.len()) as f64;
    Ok((hausdorff, assd.min(hausdorff)))
}

pub fn segmentation_metrics(a: &LiverMask, b: &LiverMask) -> Result<SegmentationMetrics> {
    let (dice, jaccard) = overlap_metrics(a, b)?;
    let (hausdorff_mm, assd_mm) = surface_distances(a, b)?;
    Ok(SegmentationMetrics {
        dice,
        jaccard,
        hausdorff_mm,
        assd_mm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volgrid::Provenance;

    fn mask(dims: [usize; 3], on: &[[usize; 3]]) -> LiverMask {
        let g = Grid::new(dims, [0.7, 0.7, 2.5]).unwrap();
        LiverMask::from_fn(g, Provenance::Expert, |i, j, k| on.contains(&[i, j, k])).unwrap()
    }

    #[test]
    fn identical_and_disjoint_overlap() {
        let a = mask([4, 4, 4], &[[0, 0, 0], [1, 0, 0]]);
        assert_eq!(overlap_metrics(&a, &a).unwrap(), (1.0, 1.0));
        let b = mask([4, 4, 4], &[[3, 3, 3]]);
        assert_eq!(overlap_metrics(&a, &b).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn two_of_three_voxels_shared() {
        let a = mask([3, 1, 1], &[[0, 0, 0], [1, 0, 0]]);
        let b = mask([3, 1, 1], &[[1, 0, 0], [2, 0, 0]]);
        let (d, j) = overlap_metrics(&a, &b).unwrap();
        assert_eq!(d, 0.5);
        assert_eq!(j, 1.0 / 3.0);
    }

    #[test]
    fn both_empty_is_undefined() {
        let a = mask([2, 2, 2], &[]);
        assert!(matches!(overlap_metrics(&a, &a), Err(Error::UndefinedMetric(_))));
        assert!(matches!(surface_distances(&a, &a), Err(Error::EmptyMask(_))));
    }

    #[test]
    fn single_voxels_three_columns_apart() {
        let a = mask([4, 1, 1], &[[0, 0, 0]]);
        let b = mask([4, 1, 1], &[[3, 0, 0]]);
        let (h, s) = surface_distances(&a, &b).unwrap();
        approx::assert_abs_diff_eq!(h, 2.1, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(s, 2.1, epsilon = 1e-12);
    }

    #[test]
    fn identical_masks_have_zero_distance() {
        let a = mask([4, 4, 4], &[[1, 1, 1], [2, 1, 1], [2, 2, 2]]);
        assert_eq!(surface_distances(&a, &a).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn misaligned_pair_is_rejected() {
        let a = mask([4, 4, 4], &[[1, 1, 1]]);
        let b = mask([4, 4, 5], &[[1, 1, 1]]);
        assert!(matches!(overlap_metrics(&a, &b), Err(Error::Alignment(_))));
    }

    #[test]
    fn transform_of_single_feature_is_euclidean() {
        let g = Grid::new([5, 4, 3], [0.7, 0.9, 2.5]).unwrap();
        let mut f = vec![false; g.len()];
        f[g.index(2, 1, 1)] = true;
        let d = squared_distance_transform(&g, &f);
        for idx in 0..g.len() {
            let [i, j, k] = g.coords(idx);
            let dx = (i as f64 - 2.0) * 0.7;
            let dy = (j as f64 - 1.0) * 0.9;
            let dz = (k as f64 - 1.0) * 2.5;
            approx::assert_abs_diff_eq!(d[idx], dx * dx + dy * dy + dz * dz, epsilon = 1e-9);
        }
    }

    #[test]
    fn transform_without_features_is_infinite() {
        let g = Grid::new([2, 2, 2], [1.0; 3]).unwrap();
        assert!(squared_distance_transform(&g, &[false; 8])
            .iter()
            .all(|d| d.is_infinite()));
    }
}
