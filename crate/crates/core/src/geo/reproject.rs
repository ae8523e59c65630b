//! Reprojection of rasters and RGB images onto a north-up UTM grid.
//!
//! Float rasters gather every source cell center into the target cell it
//! projects into and keep the maximum. Target cells that receive no center
//! (upsampling, edges) sample the source at their inverse-projected center.
//! RGB images use that nearest-neighbour sampling for every cell.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geo::{utm_forward, utm_inverse, utm_zone_for_lon, Crs, GridGeometry, Hemisphere};
use crate::geo::{Raster, RgbImage};

#[derive(Clone, Copy)]
struct Mapping {
    src: Crs,
    dst: Crs,
}

fn to_geographic(crs: Crs, x: f64, y: f64) -> Option<(f64, f64)> {
    match crs {
        Crs::GeographicWgs84 => Some((y, x)),
        Crs::Utm { zone, hemisphere } => utm_inverse(x, y, zone, hemisphere).ok(),
    }
}

fn from_geographic(crs: Crs, lat: f64, lon: f64) -> Option<(f64, f64)> {
    match crs {
        Crs::GeographicWgs84 => Some((lon, lat)),
        Crs::Utm { zone, hemisphere } => utm_forward(lat, lon, zone, hemisphere).ok(),
    }
}

impl Mapping {
    fn forward(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        if self.src == self.dst {
            return Some((x, y));
        }
        let (lat, lon) = to_geographic(self.src, x, y)?;
        from_geographic(self.dst, lat, lon)
    }

    fn inverse(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        if self.src == self.dst {
            return Some((x, y));
        }
        let (lat, lon) = to_geographic(self.dst, x, y)?;
        from_geographic(self.src, lat, lon)
    }
}

fn target_crs(src: &GridGeometry) -> Result<Crs> {
    let cx = 0.5 * (src.min_x() + src.max_x());
    let cy = 0.5 * (src.min_y() + src.max_y());
    let (lat, lon) = to_geographic(src.crs(), cx, cy)
        .ok_or_else(|| Error::invalid("source center cannot be located on the ellipsoid"))?;
    let hemisphere = if lat >= 0.0 { Hemisphere::North } else { Hemisphere::South };
    Crs::utm(utm_zone_for_lon(lon), hemisphere)
}

/// UTM grid that [`reproject_to_utm`] produces for a source grid: zone from
/// the source center longitude, extent covering the projected source outline,
/// origin snapped to multiples of `pixel_size`.
pub fn utm_target_geometry(src: &GridGeometry, pixel_size: f64) -> Result<GridGeometry> {
    if !(pixel_size.is_finite() && pixel_size > 0.0) {
        return Err(Error::invalid(format!("pixel size {pixel_size} must be > 0")));
    }
    let map = Mapping {
        src: src.crs(),
        dst: target_crs(src)?,
    };
    let (cols, rows) = (src.cols(), src.rows());
    let ps = src.pixel_size();
    let corner = |c: usize, r: usize| {
        (
            src.origin_x() + c as f64 * ps,
            src.origin_y() - r as f64 * ps,
        )
    };
    let mut outline = Vec::with_capacity(2 * (cols + rows + 2));
    for c in 0..=cols {
        outline.push(corner(c, 0));
        outline.push(corner(c, rows));
    }
    for r in 1..rows {
        outline.push(corner(0, r));
        outline.push(corner(cols, r));
    }
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (x, y) in outline {
        if let Some((px, py)) = map.forward(x, y) {
            min_x = min_x.min(px);
            max_x = max_x.max(px);
            min_y = min_y.min(py);
            max_y = max_y.max(py);
        }
    }
    if !(min_x.is_finite() && max_x.is_finite() && min_y.is_finite() && max_y.is_finite()) {
        return Err(Error::invalid("source outline does not project into UTM"));
    }
    GridGeometry::covering_extent(min_x, min_y, max_x, max_y, pixel_size, map.dst)
}

/// Reprojects a float raster to UTM at `pixel_size`.
pub fn reproject_to_utm(src: &Raster, pixel_size: f64) -> Result<Raster> {
    let sg = *src.geometry();
    if src.valid_count() == 0 {
        return Err(Error::invalid("cannot reproject an empty (all-nodata) raster"));
    }
    let target = utm_target_geometry(&sg, pixel_size)?;
    let map = Mapping {
        src: sg.crs(),
        dst: target.crs(),
    };

    // Target cell of every valid source center; projection runs per row in
    // parallel, the max reduction below is sequential.
    let hits: Vec<Vec<(usize, f32)>> = (0..sg.rows())
        .into_par_iter()
        .map(|row| {
            (0..sg.cols())
                .filter_map(|col| {
                    let v = src.valid(sg.index(col, row))?;
                    let (x, y) = sg.cell_center(col, row);
                    let (px, py) = map.forward(x, y)?;
                    let (tc, tr) = target.locate(px, py)?;
                    Some((target.index(tc, tr), v))
                })
                .collect()
        })
        .collect();

    let mut acc: Vec<Option<f32>> = vec![None; target.len()];
    for (i, v) in hits.into_iter().flatten() {
        acc[i] = Some(match acc[i] {
            Some(m) if m >= v => m,
            _ => v,
        });
    }

    let nodata = src.nodata();
    let values: Vec<f32> = acc
        .par_iter()
        .enumerate()
        .map(|(i, hit)| {
            if let Some(v) = hit {
                return *v;
            }
            let (c, r) = (i % target.cols(), i / target.cols());
            let (x, y) = target.cell_center(c, r);
            map.inverse(x, y)
                .and_then(|(sx, sy)| sg.locate(sx, sy))
                .map(|(sc, sr)| src.get(sc, sr))
                .unwrap_or(nodata)
        })
        .collect();
    Raster::new(target, nodata, values)
}

/// Reprojects an RGB image to UTM at `pixel_size` by nearest-neighbour
/// sampling. Cells falling outside the source are black.
pub fn reproject_rgb_to_utm(src: &RgbImage, pixel_size: f64) -> Result<RgbImage> {
    let sg = *src.geometry();
    let target = utm_target_geometry(&sg, pixel_size)?;
    let map = Mapping {
        src: sg.crs(),
        dst: target.crs(),
    };
    let pixels: Vec<[u8; 3]> = (0..target.len())
        .into_par_iter()
        .map(|i| {
            let (x, y) = target.cell_center(i % target.cols(), i / target.cols());
            map.inverse(x, y)
                .and_then(|(sx, sy)| sg.locate(sx, sy))
                .map(|(sc, sr)| src.pixel(sg.index(sc, sr)))
                .unwrap_or([0, 0, 0])
        })
        .collect();
    let mut out = RgbImage::filled(target, [0, 0, 0]);
    for (i, px) in pixels.into_iter().enumerate() {
        out.set_pixel(i, px);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_in_same_zone() {
        let crs = Crs::utm(33, Hemisphere::North).unwrap();
        let g = GridGeometry::new(499_998.0, 5_000_010.0, 3.0, 4, 3, crs).unwrap();
        let vals: Vec<f32> = (0..12).map(|v| v as f32 * 1.5).collect();
        let mut vals_nd = vals.clone();
        vals_nd[5] = -9999.0;
        let src = Raster::new(g, -9999.0, vals_nd.clone()).unwrap();
        let out = reproject_to_utm(&src, 3.0).unwrap();
        assert_eq!(out.geometry(), &g);
        assert_eq!(out.values(), &vals_nd[..]);
    }

    #[test]
    fn unsnapped_source_is_snapped() {
        let crs = Crs::utm(33, Hemisphere::North).unwrap();
        let g = GridGeometry::new(500_002.0, 5_000_010.0, 3.0, 2, 1, crs).unwrap();
        let src = Raster::new(g, -9999.0, vec![1.0, 2.0]).unwrap();
        let out = reproject_to_utm(&src, 3.0).unwrap();
        assert_eq!(out.geometry().origin_x(), 500_001.0);
        assert_eq!(out.geometry().cols(), 3);
        // centers 500003.5 -> col 0, 500006.5 -> col 1; the col 2 center lies
        // east of the source extent.
        assert_eq!(out.values(), &[1.0, 2.0, -9999.0]);
    }

    #[test]
    fn single_pixel_lands_in_its_projected_cell() {
        let g = GridGeometry::new(15.0, 45.0, 0.0001, 1, 1, Crs::GeographicWgs84).unwrap();
        let src = Raster::new(g, -9999.0, vec![42.0]).unwrap();
        let out = reproject_to_utm(&src, 3.0).unwrap();
        let (e, n) = utm_forward(45.0 - 0.00005, 15.00005, 33, Hemisphere::North).unwrap();
        let (c, r) = out.geometry().locate(e, n).unwrap();
        assert_eq!(out.get(c, r), 42.0);
        assert_eq!(out.geometry().crs(), Crs::utm(33, Hemisphere::North).unwrap());
    }

    #[test]
    fn southern_source_gets_southern_zone() {
        let g = GridGeometry::new(-47.01, -15.0, 0.001, 10, 10, Crs::GeographicWgs84).unwrap();
        let out = reproject_to_utm(&Raster::filled(g, -9999.0, 1.0), 30.0).unwrap();
        assert_eq!(out.geometry().crs(), Crs::utm(23, Hemisphere::South).unwrap());
    }

    #[test]
    fn rejects_empty_source() {
        let g = GridGeometry::new(15.0, 45.0, 0.001, 2, 2, Crs::GeographicWgs84).unwrap();
        assert!(reproject_to_utm(&Raster::filled(g, -9999.0, -9999.0), 3.0).is_err());
    }

    #[test]
    fn rgb_nearest_neighbour_identity() {
        let crs = Crs::utm(18, Hemisphere::North).unwrap();
        let g = GridGeometry::new(300_000.0, 4_300_002.0, 3.0, 2, 2, crs).unwrap();
        let img = RgbImage::from_interleaved(g, &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12]).unwrap();
        let out = reproject_rgb_to_utm(&img, 3.0).unwrap();
        assert_eq!(out, img);
    }
}
