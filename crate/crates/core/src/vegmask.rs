//! RGB vegetation masks and removal of non-vegetation heights from CHMs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{GridGeometry, Raster, RgbImage, DEFAULT_NODATA};

pub const VEGETATION: f32 = 1.0;
pub const NON_VEGETATION: f32 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VegThresholds {
    pub ndi_min: f64,
    pub exb_max: f64,
}

impl Default for VegThresholds {
    fn default() -> Self {
        VegThresholds {
            ndi_min: 0.0,
            exb_max: 0.15,
        }
    }
}

impl VegThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.ndi_min) {
            return Err(Error::invalid(format!("ndi_min must be in [-1, 1], got {}", self.ndi_min)));
        }
        if !self.exb_max.is_finite() {
            return Err(Error::invalid("exb_max must be finite"));
        }
        Ok(())
    }
}

/// Normalized difference index (G − R) / (G + R); 0 when G + R = 0.
pub fn ndi(rgb: [u8; 3]) -> f64 {
    let (r, g) = (rgb[0] as f64, rgb[1] as f64);
    if r + g == 0.0 {
        0.0
    } else {
        (g - r) / (g + r)
    }
}

/// Excess blue index 1.4·b − g on chromatic coordinates; black counts as gray.
pub fn exb(rgb: [u8; 3]) -> f64 {
    let s: f64 = rgb.iter().map(|c| *c as f64).sum();
    if s == 0.0 {
        return 1.4 / 3.0 - 1.0 / 3.0;
    }
    1.4 * rgb[2] as f64 / s - rgb[1] as f64 / s
}

fn index_raster(img: &RgbImage, f: fn([u8; 3]) -> f64) -> Raster {
    let values = (0..img.geometry().len())
        .into_par_iter()
        .map(|i| f(img.pixel(i)) as f32)
        .collect();
    Raster::new(*img.geometry(), DEFAULT_NODATA, values).expect("index values are finite")
}

pub fn compute_ndi(img: &RgbImage) -> Raster {
    index_raster(img, ndi)
}

pub fn compute_exb(img: &RgbImage) -> Raster {
    index_raster(img, exb)
}

/// 1 where NDI > `ndi_min` and ExB < `exb_max`, else 0.
pub fn classify_vegetation(img: &RgbImage, t: &VegThresholds) -> Raster {
    let values = (0..img.geometry().len())
        .into_par_iter()
        .map(|i| {
            let px = img.pixel(i);
            if ndi(px) > t.ndi_min && exb(px) < t.exb_max {
                VEGETATION
            } else {
                NON_VEGETATION
            }
        })
        .collect();
    Raster::new(*img.geometry(), DEFAULT_NODATA, values).expect("mask values are finite")
}

/// Brings a 0/1 mask onto `target`. When the mask is at least as fine as the
/// target, each target cell takes the majority of the mask cells whose centers
/// it contains (ties count as vegetation, no centers give nodata). A coarser
/// mask is sampled at each target cell center.
pub fn align_mask(mask: &Raster, target: &GridGeometry) -> Result<Raster> {
    let mg = mask.geometry();
    if mg.crs() != target.crs() {
        return Err(Error::CrsMismatch(mg.crs(), target.crs()));
    }
    if mg.same_grid(target) {
        return Ok(mask.clone());
    }
    let nodata = DEFAULT_NODATA;
    let values = if mg.pixel_size() <= target.pixel_size() {
        let mut veg = vec![0u32; target.len()];
        let mut other = vec![0u32; target.len()];
        for row in 0..mg.rows() {
            for col in 0..mg.cols() {
                let Some(v) = mask.valid(mg.index(col, row)) else {
                    continue;
                };
                let (x, y) = mg.cell_center(col, row);
                if let Some((tc, tr)) = target.locate(x, y) {
                    let i = target.index(tc, tr);
                    if v == VEGETATION {
                        veg[i] += 1;
                    } else {
                        other[i] += 1;
                    }
                }
            }
        }
        veg.iter()
            .zip(&other)
            .map(|(&a, &b)| match (a, b) {
                (0, 0) => nodata,
                (a, b) if a >= b => VEGETATION,
                _ => NON_VEGETATION,
            })
            .collect()
    } else {
        (0..target.len())
            .map(|i| {
                let (x, y) = target.cell_center(i % target.cols(), i / target.cols());
                mg.locate(x, y)
                    .and_then(|(c, r)| mask.valid(mg.index(c, r)))
                    .unwrap_or(nodata)
            })
            .collect()
    };
    Raster::new(*target, nodata, values)
}

/// Zeroes positive CHM cells that the mask marks as non-vegetation. Nodata in
/// either input gives nodata.
pub fn remove_structures(chm: &Raster, mask: &Raster) -> Result<Raster> {
    chm.geometry().ensure_same(mask.geometry(), "CHM and vegetation mask")?;
    let nodata = chm.nodata();
    let values = (0..chm.geometry().len())
        .map(|i| match (chm.valid(i), mask.valid(i)) {
            (Some(h), Some(m)) if m == VEGETATION => Ok(h),
            (Some(h), Some(m)) if m == NON_VEGETATION => Ok(if h > 0.0 { 0.0 } else { h }),
            (_, Some(m)) if m != VEGETATION && m != NON_VEGETATION => Err(Error::invalid(
                format!("vegetation mask value {m} at cell {i} is not 0 or 1"),
            )),
            _ => Ok(nodata),
        })
        .collect::<Result<Vec<f32>>>()?;
    Raster::new(*chm.geometry(), nodata, values)
}
