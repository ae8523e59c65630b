//! Center-in-cell aggregation between grids that share a CRS.
//!
//! Every valid source cell contributes to the single target cell containing
//! its center. Target cells without any contribution are nodata.

use crate::error::{Error, Result};
use crate::geo::{GridGeometry, Raster};

fn check_compatible(src: &Raster, target: &GridGeometry) -> Result<()> {
    let sg = src.geometry();
    if sg.crs() != target.crs() {
        return Err(Error::CrsMismatch(sg.crs(), target.crs()));
    }
    if target.pixel_size() < sg.pixel_size() {
        return Err(Error::invalid(format!(
            "target pixel size {} is finer than source pixel size {}",
            target.pixel_size(),
            sg.pixel_size()
        )));
    }
    Ok(())
}

/// Visits `(target_index, value)` for every valid source cell whose center
/// lies inside `target`, in source row-major order.
fn for_each_contribution(src: &Raster, target: &GridGeometry, mut f: impl FnMut(usize, f32)) {
    let sg = src.geometry();
    for row in 0..sg.rows() {
        for col in 0..sg.cols() {
            let Some(v) = src.valid(sg.index(col, row)) else {
                continue;
            };
            let (x, y) = sg.cell_center(col, row);
            if let Some((tc, tr)) = target.locate(x, y) {
                f(target.index(tc, tr), v);
            }
        }
    }
}

/// Maximum-value aggregation of `src` onto `target`.
pub fn resample_max(src: &Raster, target: &GridGeometry) -> Result<Raster> {
    check_compatible(src, target)?;
    let mut acc: Vec<Option<f32>> = vec![None; target.len()];
    for_each_contribution(src, target, |i, v| {
        acc[i] = Some(match acc[i] {
            Some(m) if m >= v => m,
            _ => v,
        });
    });
    let nodata = src.nodata();
    Raster::new(
        *target,
        nodata,
        acc.into_iter().map(|v| v.unwrap_or(nodata)).collect(),
    )
}

/// Mean-value aggregation of `src` onto `target`, accumulated in f64.
pub fn resample_mean(src: &Raster, target: &GridGeometry) -> Result<Raster> {
    check_compatible(src, target)?;
    let mut sum = vec![0.0f64; target.len()];
    let mut count = vec![0u32; target.len()];
    for_each_contribution(src, target, |i, v| {
        sum[i] += v as f64;
        count[i] += 1;
    });
    let nodata = src.nodata();
    Raster::new(
        *target,
        nodata,
        sum.iter()
            .zip(&count)
            .map(|(&s, &n)| if n == 0 { nodata } else { (s / n as f64) as f32 })
            .collect(),
    )
}
