//! Binary mask algebra: connected components, largest-component retention,
//! per-slice areas and surface voxels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::volgrid::{Grid, LiverMask};
use crate::{Error, Result};

/// Voxel adjacency used for component labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    /// Faces only.
    Six,
    /// Faces, edges and corners.
    #[default]
    TwentySix,
}

impl Connectivity {
    fn offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::new();
        for dk in -1isize..=1 {
            for dj in -1isize..=1 {
                for di in -1isize..=1 {
                    let manhattan = di.abs() + dj.abs() + dk.abs();
                    let keep = match self {
                        Connectivity::Six => manhattan == 1,
                        Connectivity::TwentySix => manhattan > 0,
                    };
                    if keep {
                        out.push([di, dj, dk]);
                    }
                }
            }
        }
        out
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            6 => Ok(Connectivity::Six),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::Argument(format!(
                "connectivity must be 6 or 26, got {other}"
            ))),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Six => 6,
            Connectivity::TwentySix => 26,
        }
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: u8 = s
            .trim()
            .parse()
            .map_err(|_| Error::Argument(format!("connectivity must be 6 or 26, got {s:?}")))?;
        Connectivity::try_from(v)
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

#[inline]
fn step(grid: &Grid, at: [usize; 3], d: [isize; 3]) -> Option<usize> {
    let dims = grid.dims();
    let mut out = [0usize; 3];
    for a in 0..3 {
        let v = at[a] as isize + d[a];
        if v < 0 || v >= dims[a] as isize {
            return None;
        }
        out[a] = v as usize;
    }
    Some(grid.index(out[0], out[1], out[2]))
}

/// Labels `1..=k` in raster order of each component's first voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLabeling {
    pub labels: Vec<u32>,
    /// `sizes[l - 1]` is the voxel count of label `l`.
    pub sizes: Vec<usize>,
    pub connectivity: Connectivity,
}

impl ComponentLabeling {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }
}

pub fn connected_components(mask: &LiverMask, connectivity: Connectivity) -> ComponentLabeling {
    let grid = mask.grid();
    let data = mask.data();
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; data.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();

    for seed in 0..data.len() {
        if !data[seed] || labels[seed] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[seed] = label;
        stack.push(seed);
        let mut size = 0usize;
        while let Some(v) = stack.pop() {
            size += 1;
            let at = grid.coords(v);
            for &d in &offsets {
                if let Some(n) = step(grid, at, d) {
                    if data[n] && labels[n] == 0 {
                        labels[n] = label;
                        stack.push(n);
                    }
                }
            }
        }
        sizes.push(size);
    }

    ComponentLabeling {
        labels,
        sizes,
        connectivity,
    }
}

/// Keeps only the largest component; equal sizes go to the lower label.
pub fn largest_component(mask: &LiverMask, connectivity: Connectivity) -> Result<LiverMask> {
    let labeling = connected_components(mask, connectivity);
    let mut best: Option<(usize, u32)> = None;
    for (i, &size) in labeling.sizes.iter().enumerate() {
        if best.is_none_or(|(s, _)| size > s) {
            best = Some((size, i as u32 + 1));
        }
    }
    let (_, keep) = best.ok_or_else(|| Error::EmptyMask("no foreground voxels to label".into()))?;
    let data = labeling.labels.iter().map(|&l| l == keep).collect();
    Ok(mask.postprocessed(data))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceArea {
    pub pixels: usize,
    pub cm2: f64,
}

pub fn slice_areas(mask: &LiverMask) -> Vec<SliceArea> {
    let grid = mask.grid();
    let [sx, sy, _] = grid.spacing();
    let per_pixel_mm2 = sx * sy;
    mask.data()
        .chunks(grid.slice_len())
        .map(|slice| {
            let pixels = slice.iter().filter(|&&b| b).count();
            SliceArea {
                pixels,
                cm2: pixels as f64 * per_pixel_mm2 / 100.0,
            }
        })
        .collect()
}

/// Index of the axial slice with the most mask pixels; ties go to the lower
/// index.
pub fn largest_area_slice(mask: &LiverMask) -> Result<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (k, area) in slice_areas(mask).iter().enumerate() {
        if area.pixels > 0 && best.is_none_or(|(p, _)| area.pixels > p) {
            best = Some((area.pixels, k));
        }
    }
    best.map(|(_, k)| k)
        .ok_or_else(|| Error::EmptyMask("no slice contains mask pixels".into()))
}

/// Foreground voxels with a face neighbour that is background or outside
/// the array, in raster order.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceVoxelSet {
    pub voxels: Vec<[usize; 3]>,
    pub spacing: [f64; 3],
}

impl SurfaceVoxelSet {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }
}

pub(crate) fn is_surface(grid: &Grid, data: &[bool], at: [usize; 3]) -> bool {
    const FACES: [[isize; 3]; 6] = [
        [-1, 0, 0],
        [1, 0, 0],
        [0, -1, 0],
        [0, 1, 0],
        [0, 0, -1],
        [0, 0, 1],
    ];
    FACES
        .iter()
        .any(|&d| step(grid, at, d).is_none_or(|n| !data[n]))
}

pub fn surface_voxels(mask: &LiverMask) -> SurfaceVoxelSet {
    let grid = mask.grid();
    let data = mask.data();
    let voxels = (0..data.len())
        .filter(|&v| data[v])
        .map(|v| grid.coords(v))
        .filter(|&at| is_surface(grid, data, at))
        .collect();
    SurfaceVoxelSet {
        voxels,
        spacing: grid.spacing(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volgrid::Provenance;

    fn mask(dims: [usize; 3], on: &[[usize; 3]]) -> LiverMask {
        let g = Grid::new(dims, [0.7, 0.7, 2.5]).unwrap();
        LiverMask::from_fn(g, Provenance::Model, |i, j, k| on.contains(&[i, j, k])).unwrap()
    }

    #[test]
    fn empty_mask_has_no_components() {
        let m = mask([3, 3, 3], &[]);
        assert_eq!(connected_components(&m, Connectivity::TwentySix).count(), 0);
        assert!(matches!(
            largest_component(&m, Connectivity::Six),
            Err(Error::EmptyMask(_))
        ));
    }

    #[test]
    fn full_cube_is_one_component() {
        let g = Grid::new([3, 3, 3], [1.0; 3]).unwrap();
        let m = LiverMask::new(g, vec![true; 27], Provenance::Model).unwrap();
        let l = connected_components(&m, Connectivity::Six);
        assert_eq!(l.sizes, vec![27]);
    }

    #[test]
    fn corner_contact_depends_on_connectivity() {
        let m = mask([2, 2, 2], &[[0, 0, 0], [1, 1, 1]]);
        assert_eq!(connected_components(&m, Connectivity::Six).count(), 2);
        assert_eq!(connected_components(&m, Connectivity::TwentySix).count(), 1);
    }

    #[test]
    fn labels_follow_raster_order() {
        let m = mask([4, 1, 1], &[[3, 0, 0], [0, 0, 0]]);
        let l = connected_components(&m, Connectivity::TwentySix);
        assert_eq!(l.labels, vec![1, 0, 0, 2]);
    }

    #[test]
    fn largest_of_ten_and_five() {
        let mut on = Vec::new();
        for i in 0..5 {
            on.push([i, 0, 0]);
        }
        for i in 0..10 {
            on.push([i, 3, 0]);
        }
        let m = mask([10, 4, 1], &on);
        let out = largest_component(&m, Connectivity::TwentySix).unwrap();
        assert_eq!(out.count(), 10);
        assert!(out.get(0, 3, 0) && !out.get(0, 0, 0));
        assert_eq!(out.provenance(), Provenance::Postprocessed);
    }

    #[test]
    fn equal_sizes_keep_first_seen() {
        let m = mask([5, 1, 1], &[[0, 0, 0], [1, 0, 0], [3, 0, 0], [4, 0, 0]]);
        let out = largest_component(&m, Connectivity::Six).unwrap();
        assert!(out.get(0, 0, 0) && out.get(1, 0, 0));
        assert!(!out.get(3, 0, 0));
    }

    #[test]
    fn slice_area_units() {
        let g = Grid::new([10, 10, 2], [0.7, 0.7, 2.5]).unwrap();
        let m = LiverMask::from_fn(g, Provenance::Expert, |_, _, k| k == 1).unwrap();
        let areas = slice_areas(&m);
        assert_eq!(areas[0].pixels, 0);
        assert_eq!(areas[0].cm2, 0.0);
        assert_eq!(areas[1].pixels, 100);
        approx::assert_relative_eq!(areas[1].cm2, 0.49, max_relative = 1e-12);
    }

    #[test]
    fn largest_slice_tie_goes_low() {
        // areas [3, 7, 7, 2]
        let counts = [3usize, 7, 7, 2];
        let g = Grid::new([10, 1, 4], [1.0; 3]).unwrap();
        let m = LiverMask::from_fn(g, Provenance::Expert, |i, _, k| i < counts[k]).unwrap();
        assert_eq!(largest_area_slice(&m).unwrap(), 1);
        assert!(largest_area_slice(&mask([2, 2, 2], &[])).is_err());
    }

    #[test]
    fn surface_of_solid_cube_excludes_only_the_centre() {
        let g = Grid::new([5, 5, 5], [1.0; 3]).unwrap();
        let m = LiverMask::from_fn(g, Provenance::Expert, |i, j, k| {
            (1..=3).contains(&i) && (1..=3).contains(&j) && (1..=3).contains(&k)
        })
        .unwrap();
        let s = surface_voxels(&m);
        assert_eq!(s.len(), 26);
        assert!(!s.voxels.contains(&[2, 2, 2]));
    }

    #[test]
    fn single_voxel_is_its_own_surface() {
        let m = mask([3, 3, 3], &[[1, 1, 1]]);
        assert_eq!(surface_voxels(&m).voxels, vec![[1, 1, 1]]);
        assert!(surface_voxels(&mask([3, 3, 3], &[])).is_empty());
    }

    #[test]
    fn array_faces_count_as_boundary() {
        let g = Grid::new([4, 4, 4], [1.0; 3]).unwrap();
        let m = LiverMask::new(g, vec![true; 64], Provenance::Expert).unwrap();
        // 4^3 minus the 2^3 interior
        assert_eq!(surface_voxels(&m).len(), 64 - 8);
    }

    #[test]
    fn connectivity_parses_only_six_and_twenty_six() {
        assert_eq!("6".parse::<Connectivity>().unwrap(), Connectivity::Six);
        assert_eq!("26".parse::<Connectivity>().unwrap(), Connectivity::TwentySix);
        assert!("18".parse::<Connectivity>().is_err());
    }
}
