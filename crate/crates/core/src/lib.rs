//! Automated hepatic steatosis detection on non-contrast chest CT.
//!
//! The crate covers the full measurement chain downstream of a liver
//! segmentation model:
//!
//! * [`volgrid`] loads NIfTI-1 volumes into a canonical LPS voxel order,
//!   resamples them to the working grid (0.7 x 0.7 x 2.5 mm) and windows
//!   intensities for model input.
//! * [`maskops`] postprocesses binary liver masks (connected components,
//!   largest component, per-slice areas, surface voxels).
//! * [`attenuate`] computes the AI-3D, AI-2D and AI-ROI liver attenuation
//!   measurements and the 40 HU steatosis call.
//! * [`segmetrics`] compares two masks (Dice, Jaccard, Hausdorff, ASSD).
//! * [`statkit`] holds the agreement and classification statistics.
//! * [`pipeline`] runs manifests of scans and emits cohort reports.
//! * [`phantom`] builds synthetic CT phantoms for tests and demos.

pub mod attenuate;
pub mod error;
pub mod maskops;
pub mod phantom;
pub mod pipeline;
pub mod segmetrics;
pub mod statkit;
pub mod volgrid;

pub use error::{Error, Result};
