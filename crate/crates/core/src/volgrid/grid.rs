use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Direction each voxel index increases toward after loading: column toward
/// the patient's left, row toward posterior, slice toward superior.
pub const CANONICAL_AXES: [char; 3] = ['L', 'P', 'S'];

/// Voxel grid geometry shared by a volume and its masks.
///
/// Voxel `(col, row, slice)` lives at linear offset
/// `col + nx * (row + ny * slice)`. The affine maps voxel indices to RAS
/// world millimetres; its translation column is the centre of voxel 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dims: [usize; 3],
    spacing: [f64; 3],
    affine: [[f64; 4]; 3],
}

impl Grid {
    /// Axis-aligned canonical grid with voxel 0 at the world origin.
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        Self::with_origin(dims, spacing, [0.0; 3])
    }

    pub fn with_origin(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        let affine = [
            [-spacing[0], 0.0, 0.0, origin[0]],
            [0.0, -spacing[1], 0.0, origin[1]],
            [0.0, 0.0, spacing[2], origin[2]],
        ];
        Self::from_affine(dims, spacing, affine)
    }

    pub(crate) fn from_affine(
        dims: [usize; 3],
        spacing: [f64; 3],
        affine: [[f64; 4]; 3],
    ) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Argument(format!("grid dims must be >= 1, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::Argument(format!(
                "grid spacing must be finite and > 0, got {spacing:?}"
            )));
        }
        if affine.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Argument("affine contains non-finite entries".into()));
        }
        Ok(Self {
            dims,
            spacing,
            affine,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn affine(&self) -> [[f64; 4]; 3] {
        self.affine
    }

    pub fn origin(&self) -> [f64; 3] {
        [self.affine[0][3], self.affine[1][3], self.affine[2][3]]
    }

    pub fn orientation(&self) -> [char; 3] {
        CANONICAL_AXES
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixels per axial slice.
    pub fn slice_len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize, slice: usize) -> usize {
        col + self.dims[0] * (row + self.dims[1] * slice)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Rejects any pairing whose geometry differs in the slightest.
    pub fn ensure_aligned(&self, other: &Grid) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Alignment(format!(
                "dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        if self.spacing != other.spacing {
            return Err(Error::Alignment(format!(
                "spacing {:?} vs {:?}",
                self.spacing, other.spacing
            )));
        }
        if self.affine != other.affine {
            return Err(Error::Alignment("affines differ".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtVolume {
    grid: Grid,
    data: Vec<f64>,
}

impl CtVolume {
    /// `data` is in HU and laid out in the grid's canonical voxel order.
    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Argument(format!(
                "volume payload has {} values, grid needs {}",
                data.len(),
                grid.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "non-finite HU value at voxel {:?}",
                grid.coords(i)
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let [nx, ny, nz] = grid.dims();
        let mut data = Vec::with_capacity(grid.len());
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::new(grid, data)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, col: usize, row: usize, slice: usize) -> f64 {
        self.data[self.grid.index(col, row, slice)]
    }

    /// Adds `offset` HU to every voxel.
    pub fn shifted(&self, offset: f64) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.data.iter().map(|v| v + offset).collect(),
        )
    }
}

/// Windowed model input with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedVolume {
    grid: Grid,
    data: Vec<f64>,
}

impl NormalizedVolume {
    pub(crate) fn new_unchecked(grid: Grid, data: Vec<f64>) -> Self {
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Expert,
    Model,
    Postprocessed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiverMask {
    grid: Grid,
    data: Vec<bool>,
    provenance: Provenance,
}

impl LiverMask {
    pub fn new(grid: Grid, data: Vec<bool>, provenance: Provenance) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Argument(format!(
                "mask payload has {} values, grid needs {}",
                data.len(),
                grid.len()
            )));
        }
        if provenance == Provenance::Postprocessed {
            return Err(Error::Argument(
                "postprocessed masks are only produced by mask operations".into(),
            ));
        }
        Ok(Self {
            grid,
            data,
            provenance,
        })
    }

    pub fn from_fn(
        grid: Grid,
        provenance: Provenance,
        mut f: impl FnMut(usize, usize, usize) -> bool,
    ) -> Result<Self> {
        let [nx, ny, nz] = grid.dims();
        let mut data = Vec::with_capacity(grid.len());
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::new(grid, data, provenance)
    }

    /// Same grid, new voxel set, provenance advanced to postprocessed.
    pub(crate) fn postprocessed(&self, data: Vec<bool>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            grid: self.grid.clone(),
            data,
            provenance: Provenance::Postprocessed,
        }
    }

    pub(crate) fn with_grid(&self, grid: Grid, data: Vec<bool>) -> Self {
        Self {
            grid,
            data,
            provenance: self.provenance,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn get(&self, col: usize, row: usize, slice: usize) -> bool {
        self.data[self.grid.index(col, row, slice)]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    pub fn ensure_aligned_with(&self, vol: &CtVolume) -> Result<()> {
        self.grid.ensure_aligned(vol.grid())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trips_through_coords() {
        let g = Grid::new([3, 4, 5], [1.0, 1.0, 1.0]).unwrap();
        for idx in 0..g.len() {
            let [i, j, k] = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Grid::new([0, 1, 1], [1.0; 3]).is_err());
        assert!(Grid::new([1, 1, 1], [1.0, 0.0, 1.0]).is_err());
        assert!(Grid::new([1, 1, 1], [1.0, -2.0, 1.0]).is_err());
    }

    #[test]
    fn volume_rejects_non_finite_hu() {
        let g = Grid::new([2, 1, 1], [1.0; 3]).unwrap();
        assert!(CtVolume::new(g.clone(), vec![0.0, f64::NAN]).is_err());
        assert!(CtVolume::new(g, vec![0.0]).is_err());
    }

    #[test]
    fn misaligned_grids_are_rejected() {
        let a = Grid::new([2, 2, 2], [0.7, 0.7, 2.5]).unwrap();
        let b = Grid::new([2, 2, 3], [0.7, 0.7, 2.5]).unwrap();
        let c = Grid::with_origin([2, 2, 2], [0.7, 0.7, 2.5], [1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(a.ensure_aligned(&b), Err(Error::Alignment(_))));
        assert!(matches!(a.ensure_aligned(&c), Err(Error::Alignment(_))));
        assert!(a.ensure_aligned(&a.clone()).is_ok());
    }

    #[test]
    fn masks_cannot_be_born_postprocessed() {
        let g = Grid::new([1, 1, 1], [1.0; 3]).unwrap();
        assert!(LiverMask::new(g, vec![true], Provenance::Postprocessed).is_err());
    }
}
