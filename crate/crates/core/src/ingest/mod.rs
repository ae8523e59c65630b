//! Readers and writers for the supported point-cloud, raster, image and
//! metadata formats, plus statistical outlier removal.

mod kdtree;
mod las;
mod meta;
mod outliers;
mod ppm;
mod raster_io;
mod text;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{Crs, Hemisphere};

pub use las::{read_las, LAS_HEADER_SIZE};
pub use meta::{read_image_meta_table, write_image_meta_table};
pub use outliers::{outlier_mean_distances, remove_outliers, OutlierParams};
pub use ppm::{read_ppm, read_rgb_file, write_ppm, write_rgb_file, GeoSidecar};
pub use raster_io::{
    read_ascii_grid, read_chmr, read_raster_file, write_ascii_grid, write_chmr, write_raster_file,
    CHMR_HEADER_SIZE,
};
pub use text::{read_point_text, write_point_text};

/// Reads a point cloud, choosing the decoder from the extension: `.las` is
/// binary LAS, anything else is whitespace-separated text.
pub fn read_point_file(path: &std::path::Path, crs: Crs) -> Result<PointCloud> {
    let is_las = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("las"));
    if is_las {
        read_las(&std::fs::read(path)?, crs)
    } else {
        read_point_text(&std::fs::read_to_string(path)?, crs)
    }
}

/// Writes a point cloud as text (`x y z [class]`).
pub fn write_point_file(path: &std::path::Path, pc: &PointCloud) -> Result<()> {
    std::fs::write(path, write_point_text(pc))?;
    Ok(())
}

/// ASPRS classification codes used by the class-based split.
pub mod class {
    pub const UNCLASSIFIED: u8 = 1;
    pub const GROUND: u8 = 2;
    pub const LOW_VEGETATION: u8 = 3;
    pub const MEDIUM_VEGETATION: u8 = 4;
    pub const HIGH_VEGETATION: u8 = 5;
    pub const BUILDING: u8 = 6;
    pub const WATER: u8 = 9;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub classification: Option<u8>,
}

impl PointRecord {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        PointRecord {
            x,
            y,
            z,
            classification: None,
        }
    }

    pub fn with_class(x: f64, y: f64, z: f64, class: u8) -> Self {
        PointRecord {
            x,
            y,
            z,
            classification: Some(class),
        }
    }
}

/// Non-empty set of points in one CRS. `classified` is true iff every point
/// carries a classification code.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<PointRecord>,
    crs: Crs,
    classified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub min_z: f64,
    pub max_x: f64,
    pub max_y: f64,
    pub max_z: f64,
}

impl PointCloud {
    pub fn new(points: Vec<PointRecord>, crs: Crs) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("point cloud is empty"));
        }
        if let Some(i) = points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(Error::invalid(format!("point {i} has non-finite coordinates")));
        }
        let classified = points.iter().all(|p| p.classification.is_some());
        Ok(PointCloud {
            points,
            crs,
            classified,
        })
    }

    /// Like [`PointCloud::new`] but allows an empty result, for partitions.
    pub(crate) fn new_unchecked(points: Vec<PointRecord>, crs: Crs) -> Self {
        let classified = !points.is_empty() && points.iter().all(|p| p.classification.is_some());
        PointCloud {
            points,
            crs,
            classified,
        }
    }

    pub fn points(&self) -> &[PointRecord] {
        &self.points
    }
    pub fn into_points(self) -> Vec<PointRecord> {
        self.points
    }
    pub fn crs(&self) -> Crs {
        self.crs
    }
    pub fn is_classified(&self) -> bool {
        self.classified
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounds(&self) -> Bounds {
        let mut b = Bounds {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            min_z: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
            max_z: f64::NEG_INFINITY,
        };
        for p in &self.points {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.min_z = b.min_z.min(p.z);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
            b.max_z = b.max_z.max(p.z);
        }
        b
    }

    /// Points whose flag in `keep` is set, in original order. The result may
    /// be empty.
    pub fn select(&self, keep: &[bool]) -> PointCloud {
        let pts = self
            .points
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(p, _)| *p)
            .collect();
        PointCloud::new_unchecked(pts, self.crs)
    }

    /// Concatenation of two clouds in the same CRS.
    pub fn merged(&self, other: &PointCloud) -> Result<PointCloud> {
        if self.crs != other.crs {
            return Err(Error::CrsMismatch(self.crs, other.crs));
        }
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        Ok(PointCloud::new_unchecked(pts, self.crs))
    }
}

/// Acquisition metadata of one candidate satellite image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub id: String,
    pub acquisition_date: NaiveDate,
    /// Fraction in [0, 1].
    pub cloud_cover: f64,
    /// Degrees.
    pub sun_elevation: f64,
    /// Degrees.
    pub view_angle: f64,
    pub hemisphere: Hemisphere,
}

impl ImageMeta {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.cloud_cover) {
            return Err(Error::invalid(format!(
                "image {}: cloud cover {} outside [0, 1]",
                self.id, self.cloud_cover
            )));
        }
        if !self.sun_elevation.is_finite() || !self.view_angle.is_finite() {
            return Err(Error::invalid(format!("image {}: non-finite angle", self.id)));
        }
        Ok(())
    }
}
