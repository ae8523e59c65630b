//! DEM/DSM rasterization, gap filling and canopy height models.

mod spline;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{resample_max, resample_mean, GridGeometry, Raster, DEFAULT_NODATA};
use crate::ingest::PointCloud;

pub use spline::{fill_gaps_spline, gap_fill_estimates, GapEstimate, NaturalSpline};

/// DSM value for cells without canopy points.
pub const DSM_EMPTY: f32 = -1.0;

/// Per-cell statistic used for the DEM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemStatistic {
    #[default]
    Mean,
    Min,
}

/// DEM and DSM on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePair {
    pub dem: Raster,
    pub dsm: Raster,
}

/// [`rasterize_surfaces_with`] using the mean DEM statistic.
pub fn rasterize_surfaces(
    ground: &PointCloud,
    canopy: &PointCloud,
    geometry: &GridGeometry,
) -> Result<SurfacePair> {
    rasterize_surfaces_with(ground, canopy, geometry, DemStatistic::Mean)
}

/// Grids ground points into a gap-filled DEM and canopy points into a DSM
/// (per-cell maximum, [`DSM_EMPTY`] where a cell has no points).
pub fn rasterize_surfaces_with(
    ground: &PointCloud,
    canopy: &PointCloud,
    geometry: &GridGeometry,
    stat: DemStatistic,
) -> Result<SurfacePair> {
    if ground.is_empty() {
        return Err(Error::invalid("no ground points to build a DEM from"));
    }
    for pc in [ground, canopy] {
        if pc.crs() != geometry.crs() {
            return Err(Error::CrsMismatch(pc.crs(), geometry.crs()));
        }
    }

    let n = geometry.len();
    let mut sum = vec![0.0f64; n];
    let mut count = vec![0u32; n];
    let mut low = vec![f64::INFINITY; n];
    for p in ground.points() {
        let i = cell_of(geometry, p.x, p.y)?;
        sum[i] += p.z;
        count[i] += 1;
        low[i] = low[i].min(p.z);
    }
    let dem_raw: Vec<f32> = (0..n)
        .map(|i| match (count[i], stat) {
            (0, _) => DEFAULT_NODATA,
            (c, DemStatistic::Mean) => (sum[i] / c as f64) as f32,
            (_, DemStatistic::Min) => low[i] as f32,
        })
        .collect();
    let dem = fill_gaps_spline(&Raster::new(*geometry, DEFAULT_NODATA, dem_raw)?)?;

    let mut top = vec![f64::NEG_INFINITY; n];
    for p in canopy.points() {
        let i = cell_of(geometry, p.x, p.y)?;
        top[i] = top[i].max(p.z);
    }
    let dsm_values = top
        .into_iter()
        .map(|z| if z.is_finite() { z as f32 } else { DSM_EMPTY })
        .collect();
    let dsm = Raster::new(*geometry, DEFAULT_NODATA, dsm_values)?;
    Ok(SurfacePair { dem, dsm })
}

fn cell_of(g: &GridGeometry, x: f64, y: f64) -> Result<usize> {
    g.locate(x, y)
        .map(|(c, r)| g.index(c, r))
        .ok_or_else(|| Error::invalid(format!("point ({x}, {y}) lies outside the raster grid")))
}

/// CHM = DSM − DEM, clamped below at 0. Nodata in either input stays nodata.
pub fn derive_chm(pair: &SurfacePair) -> Result<Raster> {
    pair.dsm
        .geometry()
        .ensure_same(pair.dem.geometry(), "DSM and DEM")?;
    subtract_clamped(&pair.dsm, &pair.dem)
}

fn subtract_clamped(dsm: &Raster, dem: &Raster) -> Result<Raster> {
    let nodata = DEFAULT_NODATA;
    let values = (0..dsm.geometry().len())
        .map(|i| match (dsm.valid(i), dem.valid(i)) {
            (Some(s), Some(e)) => (s as f64 - e as f64).max(0.0) as f32,
            _ => nodata,
        })
        .collect();
    Raster::new(*dsm.geometry(), nodata, values)
}

/// CHM from independently produced DSM and DEM rasters. The finer input is
/// aggregated onto the coarser grid (DSM by maximum, DEM by mean).
pub fn chm_from_products(dsm: &Raster, dem: &Raster) -> Result<Raster> {
    let (sg, eg) = (dsm.geometry(), dem.geometry());
    if sg.crs() != eg.crs() {
        return Err(Error::CrsMismatch(sg.crs(), eg.crs()));
    }
    if sg.same_grid(eg) {
        return subtract_clamped(dsm, dem);
    }
    if !sg.overlaps(eg) {
        return Err(Error::invalid("DSM and DEM extents do not overlap"));
    }
    let target = if sg.pixel_size() > eg.pixel_size() { *sg } else { *eg };
    let dsm_t = if sg.same_grid(&target) {
        dsm.clone()
    } else {
        resample_max(dsm, &target)?
    };
    let dem_t = if eg.same_grid(&target) {
        dem.clone()
    } else {
        resample_mean(dem, &target)?
    };
    subtract_clamped(&dsm_t, &dem_t)
}

/// Sets cells flagged 1 in `mask` to nodata. Mask cells must be 0, 1 or nodata.
pub fn apply_cloud_mask(r: &Raster, mask: &Raster) -> Result<Raster> {
    r.geometry().ensure_same(mask.geometry(), "raster and cloud mask")?;
    let mut values = r.values().to_vec();
    for (i, v) in values.iter_mut().enumerate() {
        match mask.valid(i) {
            Some(m) if m == 1.0 => *v = r.nodata(),
            Some(m) if m != 0.0 => {
                return Err(Error::invalid(format!(
                    "cloud mask value {m} at cell {i} is not 0 or 1"
                )))
            }
            _ => {}
        }
    }
    Raster::new(*r.geometry(), r.nodata(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{Crs, Hemisphere};
    use crate::ingest::PointRecord;

    const ND: f32 = DEFAULT_NODATA;

    fn crs() -> Crs {
        Crs::utm(33, Hemisphere::North).unwrap()
    }

    fn geom(px: f64, cols: usize, rows: usize) -> GridGeometry {
        GridGeometry::new(0.0, 9.0, px, cols, rows, crs()).unwrap()
    }

    fn cloud(pts: Vec<(f64, f64, f64)>) -> PointCloud {
        PointCloud::new(
            pts.into_iter().map(|(x, y, z)| PointRecord::new(x, y, z)).collect(),
            crs(),
        )
        .unwrap()
    }

    fn grid_points(z: f64) -> Vec<(f64, f64, f64)> {
        (0..9)
            .flat_map(|i| (0..9).map(move |j| (i as f64 + 0.5, j as f64 + 0.5, z)))
            .collect()
    }

    #[test]
    fn constant_ground() {
        let pair = rasterize_surfaces(&cloud(grid_points(3.0)), &cloud(grid_points(3.0)), &geom(3.0, 3, 3)).unwrap();
        assert!(pair.dem.values().iter().all(|v| *v == 3.0));
    }

    #[test]
    fn per_cell_max_and_mean() {
        let ground = cloud(vec![(1.0, 8.0, 2.0), (2.0, 7.0, 2.0), (4.0, 4.0, 2.0)]);
        let canopy = cloud(vec![(1.0, 8.0, 2.0), (1.5, 7.5, 12.0), (2.0, 7.0, 5.0)]);
        let pair = rasterize_surfaces(&ground, &canopy, &geom(3.0, 3, 3)).unwrap();
        assert_eq!(pair.dsm.get(0, 0), 12.0);
        assert_eq!(pair.dem.get(0, 0), 2.0);
        assert_eq!(pair.dsm.get(2, 2), DSM_EMPTY);
        assert_eq!(pair.dem.valid_count(), 9);
    }

    #[test]
    fn min_statistic() {
        let ground = cloud(vec![(1.0, 8.0, 2.0), (2.0, 7.0, 4.0)]);
        let g = GridGeometry::new(0.0, 9.0, 3.0, 1, 1, crs()).unwrap();
        let mean = rasterize_surfaces(&ground, &ground, &g).unwrap();
        let min = rasterize_surfaces_with(&ground, &ground, &g, DemStatistic::Min).unwrap();
        assert_eq!(mean.dem.get(0, 0), 3.0);
        assert_eq!(min.dem.get(0, 0), 2.0);
    }

    #[test]
    fn rasterize_errors() {
        let g = geom(3.0, 3, 3);
        let empty = PointCloud::new(vec![PointRecord::new(1.0, 1.0, 1.0)], crs())
            .unwrap()
            .select(&[false]);
        assert!(rasterize_surfaces(&empty, &cloud(grid_points(1.0)), &g).is_err());
        let outside = cloud(vec![(20.0, 1.0, 1.0)]);
        assert!(rasterize_surfaces(&outside, &outside, &g).is_err());
    }

    fn pair(dsm: Vec<f32>, dem: Vec<f32>) -> SurfacePair {
        let g = geom(3.0, dsm.len(), 1);
        SurfacePair {
            dsm: Raster::new(g, ND, dsm).unwrap(),
            dem: Raster::new(g, ND, dem).unwrap(),
        }
    }

    #[test]
    fn chm_subtract_and_clamp() {
        let chm = derive_chm(&pair(vec![15.2, 10.0, -1.0, ND], vec![12.2, 12.0, 5.0, 1.0])).unwrap();
        assert_eq!(chm.values(), &[3.0, 0.0, 0.0, ND]);
    }

    #[test]
    fn chm_geometry_mismatch() {
        let mut p = pair(vec![1.0, 2.0], vec![0.0, 0.0]);
        p.dem = Raster::filled(geom(3.0, 3, 1), ND, 0.0);
        assert!(matches!(derive_chm(&p), Err(Error::GeometryMismatch(_))));
    }

    #[test]
    fn products_on_aligned_grids_match_derive_chm() {
        let p = pair(vec![15.0, 2.0, -1.0, 8.5], vec![3.0, 4.0, 1.0, ND]);
        assert_eq!(chm_from_products(&p.dsm, &p.dem).unwrap(), derive_chm(&p).unwrap());
    }

    #[test]
    fn products_resample_finer_dsm() {
        let mut dsm_vals = vec![7.0f32; 9];
        dsm_vals[4] = 20.0;
        let dsm = Raster::new(GridGeometry::new(0.0, 3.0, 1.0, 3, 3, crs()).unwrap(), ND, dsm_vals).unwrap();
        let dem = Raster::new(GridGeometry::new(0.0, 3.0, 3.0, 1, 1, crs()).unwrap(), ND, vec![5.0]).unwrap();
        assert_eq!(chm_from_products(&dsm, &dem).unwrap().values(), &[15.0]);
        let dem_nd = Raster::new(*dem.geometry(), ND, vec![ND]).unwrap();
        assert_eq!(chm_from_products(&dsm, &dem_nd).unwrap().values(), &[ND]);
    }

    #[test]
    fn products_disjoint_rejected() {
        let a = Raster::filled(GridGeometry::new(0.0, 3.0, 1.0, 3, 3, crs()).unwrap(), ND, 1.0);
        let b = Raster::filled(GridGeometry::new(100.0, 3.0, 3.0, 1, 1, crs()).unwrap(), ND, 1.0);
        assert!(chm_from_products(&a, &b).is_err());
    }

    #[test]
    fn cloud_mask() {
        let g = geom(3.0, 2, 2);
        let r = Raster::new(g, ND, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let zeros = Raster::filled(g, ND, 0.0);
        assert_eq!(apply_cloud_mask(&r, &zeros).unwrap(), r);
        let ones = Raster::filled(g, ND, 1.0);
        assert_eq!(apply_cloud_mask(&r, &ones).unwrap().valid_count(), 0);
        let checker = Raster::new(g, ND, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(apply_cloud_mask(&r, &checker).unwrap().values(), &[ND, 2.0, 3.0, ND]);
        let bad = Raster::new(g, ND, vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(apply_cloud_mask(&r, &bad).is_err());
    }
}
