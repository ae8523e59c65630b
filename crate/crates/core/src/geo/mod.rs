//! Georeferenced grids shared by every stage: CRS tags, north-up grid
//! geometry, single-band float rasters and 8-bit RGB images, plus the
//! projection and resampling kernels that operate on them.

mod reproject;
mod resample;
mod tmerc;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use reproject::{reproject_rgb_to_utm, reproject_to_utm, utm_target_geometry};
pub use resample::{resample_max, resample_mean};
pub use tmerc::{central_meridian, utm_forward, utm_inverse, utm_zone_for_lon};

/// Sentinel used for rasters created by this crate.
pub const DEFAULT_NODATA: f32 = -9999.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hemisphere {
    North,
    South,
}

impl FromStr for Hemisphere {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "n" | "north" => Ok(Hemisphere::North),
            "s" | "south" => Ok(Hemisphere::South),
            other => Err(Error::invalid(format!("unknown hemisphere {other:?}"))),
        }
    }
}

impl fmt::Display for Hemisphere {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hemisphere::North => "north",
            Hemisphere::South => "south",
        })
    }
}

/// Coordinate reference system. Only WGS84 geographic coordinates and the
/// 120 WGS84 UTM zones are representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Crs {
    GeographicWgs84,
    Utm { zone: u8, hemisphere: Hemisphere },
}

impl Crs {
    pub fn utm(zone: u8, hemisphere: Hemisphere) -> Result<Self> {
        if !(1..=60).contains(&zone) {
            return Err(Error::invalid(format!("UTM zone {zone} outside 1..=60")));
        }
        Ok(Crs::Utm { zone, hemisphere })
    }

    pub fn is_utm(&self) -> bool {
        matches!(self, Crs::Utm { .. })
    }

    pub fn epsg(&self) -> u32 {
        match *self {
            Crs::GeographicWgs84 => 4326,
            Crs::Utm {
                zone,
                hemisphere: Hemisphere::North,
            } => 32600 + zone as u32,
            Crs::Utm {
                zone,
                hemisphere: Hemisphere::South,
            } => 32700 + zone as u32,
        }
    }
}

impl fmt::Display for Crs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Crs::GeographicWgs84 => f.write_str("wgs84"),
            Crs::Utm { zone, hemisphere } => {
                let h = match hemisphere {
                    Hemisphere::North => 'N',
                    Hemisphere::South => 'S',
                };
                write!(f, "utm:{zone}{h}")
            }
        }
    }
}

impl FromStr for Crs {
    type Err = Error;

    /// Accepts `wgs84`, `geographic`, `utm:33N`, `utm:33s` and the matching
    /// `EPSG:4326` / `EPSG:326zz` / `EPSG:327zz` codes.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "wgs84" || t == "geographic" || t == "epsg:4326" {
            return Ok(Crs::GeographicWgs84);
        }
        let bad = || Error::invalid(format!("unrecognised CRS {s:?}"));
        if let Some(code) = t.strip_prefix("epsg:") {
            let code: u32 = code.parse().map_err(|_| bad())?;
            let (zone, hemi) = match code {
                32601..=32660 => (code - 32600, Hemisphere::North),
                32701..=32760 => (code - 32700, Hemisphere::South),
                _ => return Err(bad()),
            };
            return Crs::utm(zone as u8, hemi);
        }
        if let Some(rest) = t.strip_prefix("utm:") {
            let (num, hemi) = match rest.char_indices().last() {
                Some((i, 'n')) => (&rest[..i], Hemisphere::North),
                Some((i, 's')) => (&rest[..i], Hemisphere::South),
                _ => return Err(bad()),
            };
            let zone: u8 = num.parse().map_err(|_| bad())?;
            return Crs::utm(zone, hemi);
        }
        Err(bad())
    }
}

impl Serialize for Crs {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Crs {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// North-up grid placement: the origin is the upper-left corner, rows run
/// southward, and there are no rotation terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    origin_x: f64,
    origin_y: f64,
    pixel_size: f64,
    cols: usize,
    rows: usize,
    crs: Crs,
}

impl GridGeometry {
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        pixel_size: f64,
        cols: usize,
        rows: usize,
        crs: Crs,
    ) -> Result<Self> {
        if !(pixel_size.is_finite() && pixel_size > 0.0) {
            return Err(Error::invalid(format!("pixel size {pixel_size} must be > 0")));
        }
        if !(origin_x.is_finite() && origin_y.is_finite()) {
            return Err(Error::invalid("grid origin must be finite"));
        }
        if cols == 0 || rows == 0 {
            return Err(Error::invalid(format!("grid must be at least 1x1, got {cols}x{rows}")));
        }
        Ok(GridGeometry {
            origin_x,
            origin_y,
            pixel_size,
            cols,
            rows,
            crs,
        })
    }

    /// Smallest grid on multiples of `pixel_size` that places every point of
    /// the closed box `[min_x, max_x] x [min_y, max_y]` inside some cell.
    pub fn covering_points(
        min_x: f64,
        min_y: f64,
        max_x: f64,
        max_y: f64,
        pixel_size: f64,
        crs: Crs,
    ) -> Result<Self> {
        if !(pixel_size > 0.0) {
            return Err(Error::invalid(format!("pixel size {pixel_size} must be > 0")));
        }
        let origin_x = (min_x / pixel_size).floor() * pixel_size;
        let origin_y = (max_y / pixel_size).ceil() * pixel_size;
        let cols = ((max_x - origin_x) / pixel_size).floor() as usize + 1;
        let rows = ((origin_y - min_y) / pixel_size).floor() as usize + 1;
        GridGeometry::new(origin_x, origin_y, pixel_size, cols, rows, crs)
    }

    /// Smallest grid on multiples of `pixel_size` whose cells cover the area
    /// `[min_x, max_x] x [min_y, max_y]`.
    pub fn covering_extent(
        min_x: f64,
        min_y: f64,
        max_x: f64,
        max_y: f64,
        pixel_size: f64,
        crs: Crs,
    ) -> Result<Self> {
        if !(pixel_size > 0.0) {
            return Err(Error::invalid(format!("pixel size {pixel_size} must be > 0")));
        }
        let origin_x = (min_x / pixel_size).floor() * pixel_size;
        let origin_y = (max_y / pixel_size).ceil() * pixel_size;
        let cols = (((max_x - origin_x) / pixel_size).ceil() as usize).max(1);
        let rows = (((origin_y - min_y) / pixel_size).ceil() as usize).max(1);
        GridGeometry::new(origin_x, origin_y, pixel_size, cols, rows, crs)
    }

    pub fn origin_x(&self) -> f64 {
        self.origin_x
    }
    pub fn origin_y(&self) -> f64 {
        self.origin_y
    }
    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn crs(&self) -> Crs {
        self.crs
    }
    pub fn len(&self) -> usize {
        self.cols * self.rows
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn with_crs(mut self, crs: Crs) -> Self {
        self.crs = crs;
        self
    }

    /// Sub-grid of `cols x rows` cells starting at cell (`col0`, `row0`).
    pub fn window(&self, col0: usize, row0: usize, cols: usize, rows: usize) -> Result<Self> {
        if col0 + cols > self.cols || row0 + rows > self.rows {
            return Err(Error::invalid("window exceeds grid bounds"));
        }
        GridGeometry::new(
            self.origin_x + col0 as f64 * self.pixel_size,
            self.origin_y - row0 as f64 * self.pixel_size,
            self.pixel_size,
            cols,
            rows,
            self.crs,
        )
    }

    pub fn min_x(&self) -> f64 {
        self.origin_x
    }
    pub fn max_x(&self) -> f64 {
        self.origin_x + self.cols as f64 * self.pixel_size
    }
    pub fn max_y(&self) -> f64 {
        self.origin_y
    }
    pub fn min_y(&self) -> f64 {
        self.origin_y - self.rows as f64 * self.pixel_size
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.pixel_size,
            self.origin_y - (row as f64 + 0.5) * self.pixel_size,
        )
    }

    /// Cell containing map position (`x`, `y`). Cells are half-open: the west
    /// and north edges belong to the cell.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.origin_x) / self.pixel_size).floor();
        let r = ((self.origin_y - y) / self.pixel_size).floor();
        if c >= 0.0 && r >= 0.0 && c < self.cols as f64 && r < self.rows as f64 {
            Some((c as usize, r as usize))
        } else {
            None
        }
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.cols + col
    }

    /// Exact equality of placement, size and CRS.
    pub fn same_grid(&self, other: &GridGeometry) -> bool {
        self == other
    }

    pub fn overlaps(&self, other: &GridGeometry) -> bool {
        self.min_x() < other.max_x()
            && other.min_x() < self.max_x()
            && self.min_y() < other.max_y()
            && other.min_y() < self.max_y()
    }

    pub(crate) fn ensure_same(&self, other: &GridGeometry, what: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: {}x{} @ ({}, {}) px {} [{}] vs {}x{} @ ({}, {}) px {} [{}]",
                self.cols,
                self.rows,
                self.origin_x,
                self.origin_y,
                self.pixel_size,
                self.crs,
                other.cols,
                other.rows,
                other.origin_x,
                other.origin_y,
                other.pixel_size,
                other.crs
            )))
        }
    }
}

/// Single-band 32-bit float raster. Every stored value is finite or equal to
/// the nodata sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    geometry: GridGeometry,
    nodata: f32,
    values: Vec<f32>,
}

impl Raster {
    pub fn new(geometry: GridGeometry, nodata: f32, values: Vec<f32>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::invalid(format!(
                "raster holds {} values, geometry needs {}",
                values.len(),
                geometry.len()
            )));
        }
        let r = Raster {
            geometry,
            nodata,
            values,
        };
        if let Some(i) = r.values.iter().position(|&v| !v.is_finite() && !r.is_nodata(v)) {
            return Err(Error::invalid(format!(
                "non-finite value {} at cell {i} is not the nodata sentinel",
                r.values[i]
            )));
        }
        Ok(r)
    }

    pub fn filled(geometry: GridGeometry, nodata: f32, value: f32) -> Self {
        Raster {
            geometry,
            nodata,
            values: vec![value; geometry.len()],
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }
    pub fn nodata(&self) -> f32 {
        self.nodata
    }
    pub fn values(&self) -> &[f32] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f32> {
        self.values
    }
    pub fn cols(&self) -> usize {
        self.geometry.cols
    }
    pub fn rows(&self) -> usize {
        self.geometry.rows
    }

    pub fn is_nodata(&self, v: f32) -> bool {
        v == self.nodata || (self.nodata.is_nan() && v.is_nan())
    }

    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.values[self.geometry.index(col, row)]
    }

    /// Value at flat index `i`, or `None` for nodata.
    pub fn valid(&self, i: usize) -> Option<f32> {
        let v = self.values[i];
        (!self.is_nodata(v)).then_some(v)
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&v| !self.is_nodata(v)).count()
    }

    /// Applies `f` to every valid cell, keeping nodata cells untouched. The
    /// result must be finite.
    pub fn map_valid(&self, mut f: impl FnMut(f32) -> f32) -> Self {
        let values = self
            .values
            .iter()
            .map(|&v| if self.is_nodata(v) { v } else { f(v) })
            .collect();
        Raster {
            geometry: self.geometry,
            nodata: self.nodata,
            values,
        }
    }

    /// Copy of the `cols x rows` block starting at (`col0`, `row0`).
    pub fn window(&self, col0: usize, row0: usize, cols: usize, rows: usize) -> Result<Self> {
        let geometry = self.geometry.window(col0, row0, cols, rows)?;
        let mut values = Vec::with_capacity(cols * rows);
        for r in row0..row0 + rows {
            let start = self.geometry.index(col0, r);
            values.extend_from_slice(&self.values[start..start + cols]);
        }
        Ok(Raster {
            geometry,
            nodata: self.nodata,
            values,
        })
    }
}

/// Three-band 8-bit image on a georeferenced grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    geometry: GridGeometry,
    r: Vec<u8>,
    g: Vec<u8>,
    b: Vec<u8>,
}

impl RgbImage {
    pub fn new(geometry: GridGeometry, r: Vec<u8>, g: Vec<u8>, b: Vec<u8>) -> Result<Self> {
        let n = geometry.len();
        if r.len() != n || g.len() != n || b.len() != n {
            return Err(Error::invalid(format!(
                "RGB channel lengths {}/{}/{} do not match {} cells",
                r.len(),
                g.len(),
                b.len(),
                n
            )));
        }
        Ok(RgbImage { geometry, r, g, b })
    }

    /// Builds an image from interleaved `RGBRGB...` bytes.
    pub fn from_interleaved(geometry: GridGeometry, data: &[u8]) -> Result<Self> {
        if data.len() != geometry.len() * 3 {
            return Err(Error::invalid(format!(
                "interleaved buffer has {} bytes, expected {}",
                data.len(),
                geometry.len() * 3
            )));
        }
        let mut r = Vec::with_capacity(geometry.len());
        let mut g = Vec::with_capacity(geometry.len());
        let mut b = Vec::with_capacity(geometry.len());
        for px in data.chunks_exact(3) {
            r.push(px[0]);
            g.push(px[1]);
            b.push(px[2]);
        }
        Ok(RgbImage { geometry, r, g, b })
    }

    pub fn filled(geometry: GridGeometry, rgb: [u8; 3]) -> Self {
        let n = geometry.len();
        RgbImage {
            geometry,
            r: vec![rgb[0]; n],
            g: vec![rgb[1]; n],
            b: vec![rgb[2]; n],
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }
    pub fn red(&self) -> &[u8] {
        &self.r
    }
    pub fn green(&self) -> &[u8] {
        &self.g
    }
    pub fn blue(&self) -> &[u8] {
        &self.b
    }

    pub fn pixel(&self, i: usize) -> [u8; 3] {
        [self.r[i], self.g[i], self.b[i]]
    }

    pub fn set_pixel(&mut self, i: usize, rgb: [u8; 3]) {
        self.r[i] = rgb[0];
        self.g[i] = rgb[1];
        self.b[i] = rgb[2];
    }

    pub fn interleaved(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.r.len() * 3);
        for i in 0..self.r.len() {
            out.extend_from_slice(&[self.r[i], self.g[i], self.b[i]]);
        }
        out
    }

    pub fn window(&self, col0: usize, row0: usize, cols: usize, rows: usize) -> Result<Self> {
        let geometry = self.geometry.window(col0, row0, cols, rows)?;
        let mut out = RgbImage::filled(geometry, [0, 0, 0]);
        for r in 0..rows {
            for c in 0..cols {
                let src = self.geometry.index(col0 + c, row0 + r);
                out.set_pixel(r * cols + c, self.pixel(src));
            }
        }
        Ok(out)
    }
}
