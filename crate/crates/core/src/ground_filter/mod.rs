//! Ground / non-ground separation: the cloth simulation filter for
//! unclassified clouds and ASPRS class-code splitting for classified ones.

mod csf;

use crate::error::{Error, Result};
use crate::ingest::{class, PointCloud};

pub use csf::{csf_classify, simulate_cloth, Cloth, CsfParams, GroundLabels};

/// Class-code partition of a classified cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSplit {
    /// Class 2.
    pub ground: PointCloud,
    /// Classes 3, 4 and 5.
    pub vegetation: PointCloud,
    /// Everything else (buildings, water, noise, unclassified...).
    pub excluded: PointCloud,
}

pub fn split_by_class(pc: &PointCloud) -> Result<ClassSplit> {
    if !pc.is_classified() {
        return Err(Error::invalid("split_by_class needs a classified point cloud"));
    }
    let mut ground = Vec::new();
    let mut vegetation = Vec::new();
    let mut excluded = Vec::new();
    for p in pc.points() {
        match p.classification {
            Some(class::GROUND) => ground.push(*p),
            Some(class::LOW_VEGETATION | class::MEDIUM_VEGETATION | class::HIGH_VEGETATION) => {
                vegetation.push(*p)
            }
            _ => excluded.push(*p),
        }
    }
    Ok(ClassSplit {
        ground: PointCloud::new_unchecked(ground, pc.crs()),
        vegetation: PointCloud::new_unchecked(vegetation, pc.crs()),
        excluded: PointCloud::new_unchecked(excluded, pc.crs()),
    })
}
