//! Image selection, pseudo-depth conversion and training tile export.

mod select;
mod tiles;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Raster;

pub use select::{select_image, QualityRule, SelectionCriteria, SelectionPath};
pub use tiles::{export_tiles, read_tile_manifest, TileEntry, TileManifest, MANIFEST_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PseudoDepthConfig {
    pub h_max: f64,
}

impl Default for PseudoDepthConfig {
    fn default() -> Self {
        PseudoDepthConfig { h_max: 50.0 }
    }
}

impl PseudoDepthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h_max.is_finite() && self.h_max > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!("h_max must be > 0, got {}", self.h_max)))
        }
    }
}

/// Pseudo-depth `h_max − min(chm, h_max)`, plus the number of cells whose
/// height had to be clamped into `[0, h_max]`.
pub fn to_pseudo_depth_counted(chm: &Raster, cfg: &PseudoDepthConfig) -> Result<(Raster, usize)> {
    cfg.validate()?;
    let mut clamped = 0;
    let values = chm
        .values()
        .iter()
        .map(|&v| {
            if chm.is_nodata(v) {
                return v;
            }
            let h = v as f64;
            if h > cfg.h_max || h < 0.0 {
                clamped += 1;
            }
            (cfg.h_max - h.clamp(0.0, cfg.h_max)) as f32
        })
        .collect();
    if clamped > 0 {
        log::warn!("{clamped} CHM cells outside [0, {}] m were clamped", cfg.h_max);
    }
    Ok((Raster::new(*chm.geometry(), chm.nodata(), values)?, clamped))
}

pub fn to_pseudo_depth(chm: &Raster, cfg: &PseudoDepthConfig) -> Result<Raster> {
    to_pseudo_depth_counted(chm, cfg).map(|(r, _)| r)
}

/// Inverse transform `h_max − d`; depths outside `[0, h_max]` are rejected.
pub fn from_pseudo_depth(d: &Raster, cfg: &PseudoDepthConfig) -> Result<Raster> {
    cfg.validate()?;
    let values = d
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if d.is_nodata(v) {
                return Ok(v);
            }
            let x = v as f64;
            if !(0.0..=cfg.h_max).contains(&x) {
                return Err(Error::invalid(format!(
                    "pseudo-depth {v} at cell {i} outside [0, {}]",
                    cfg.h_max
                )));
            }
            Ok((cfg.h_max - x) as f32)
        })
        .collect::<Result<Vec<f32>>>()?;
    Raster::new(*d.geometry(), d.nodata(), values)
}
