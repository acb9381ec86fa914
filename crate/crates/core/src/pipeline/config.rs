use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attenuate::{
    RoiParams, DEFAULT_NEIGHBOR_MM, DEFAULT_ROI_OFFSET_PX, DEFAULT_ROI_RADIUS_PX,
    DEFAULT_THRESHOLD_HU,
};
use crate::maskops::Connectivity;
use crate::statkit::{BootstrapConfig, DEFAULT_LEVEL, DEFAULT_REPLICATES};
use crate::volgrid::DEFAULT_SPACING;
use crate::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

/// Every tunable of a run. Loaded from a versioned TOML file, overridden by
/// command-line flags, and echoed verbatim into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub threshold_hu: f64,
    pub roi_radius_px: u32,
    pub roi_offset_px: u32,
    pub roi_neighbor_mm: f64,
    pub spacing: [f64; 3],
    pub connectivity: Connectivity,
    pub seed: u64,
    /// Scan-level worker threads; 0 uses every available core.
    pub workers: usize,
    pub bootstrap_reps: usize,
    pub ci_level: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            threshold_hu: DEFAULT_THRESHOLD_HU,
            roi_radius_px: DEFAULT_ROI_RADIUS_PX,
            roi_offset_px: DEFAULT_ROI_OFFSET_PX,
            roi_neighbor_mm: DEFAULT_NEIGHBOR_MM,
            spacing: DEFAULT_SPACING,
            connectivity: Connectivity::TwentySix,
            seed: 0,
            workers: 0,
            bootstrap_reps: DEFAULT_REPLICATES,
            ci_level: DEFAULT_LEVEL,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if !self.threshold_hu.is_finite() {
            return Err(Error::Config("threshold_hu must be finite".into()));
        }
        if self.roi_radius_px == 0 {
            return Err(Error::Config("roi_radius_px must be > 0".into()));
        }
        if !(self.roi_neighbor_mm.is_finite() && self.roi_neighbor_mm > 0.0) {
            return Err(Error::Config("roi_neighbor_mm must be > 0".into()));
        }
        if self.spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config(format!(
                "spacing must be positive, got {:?}",
                self.spacing
            )));
        }
        if self.bootstrap_reps == 0 {
            return Err(Error::Config("bootstrap_reps must be >= 1".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::Config("ci_level must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn roi_params(&self) -> RoiParams {
        RoiParams {
            radius_px: self.roi_radius_px,
            offset_px: self.roi_offset_px,
            neighbor_mm: self.roi_neighbor_mm,
        }
    }

    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            n_rep: self.bootstrap_reps,
            level: self.ci_level,
            seed: self.seed,
        }
    }
}
