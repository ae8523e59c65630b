//! Statistical outlier removal on 3-D k-nearest-neighbour distances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::kdtree::KdTree;
use crate::ingest::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutlierParams {
    pub k: usize,
    pub sigma_mult: f64,
}

impl Default for OutlierParams {
    fn default() -> Self {
        OutlierParams {
            k: 8,
            sigma_mult: 3.0,
        }
    }
}

impl OutlierParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("outlier k must be >= 1"));
        }
        if !(self.sigma_mult.is_finite() && self.sigma_mult > 0.0) {
            return Err(Error::invalid("outlier sigma_mult must be > 0"));
        }
        Ok(())
    }
}

/// Mean Euclidean distance from each point to its `k` nearest neighbours
/// (the point itself excluded, duplicates included).
pub fn outlier_mean_distances(pc: &PointCloud, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid("outlier k must be >= 1"));
    }
    if pc.len() < k + 1 {
        return Err(Error::invalid(format!(
            "outlier removal with k={k} needs at least {} points, got {}",
            k + 1,
            pc.len()
        )));
    }
    let pts: Vec<[f64; 3]> = pc.points().iter().map(|p| [p.x, p.y, p.z]).collect();
    let tree = KdTree::build(&pts);
    Ok(pts
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let d = tree.nearest_excluding(q, k, i);
            d.iter().map(|d2| d2.sqrt()).sum::<f64>() / k as f64
        })
        .collect())
}

/// Removes points whose mean k-NN distance exceeds
/// `mean + sigma_mult * stddev` of all mean distances (population stddev).
/// Survivors keep their order.
pub fn remove_outliers(pc: &PointCloud, k: usize, sigma_mult: f64) -> Result<PointCloud> {
    OutlierParams { k, sigma_mult }.validate()?;
    let d = outlier_mean_distances(pc, k)?;
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let threshold = mean + sigma_mult * var.sqrt();
    // Relative slack so rounding noise among equal distances never trips it.
    let limit = threshold + threshold.abs() * 1e-9;
    let keep: Vec<bool> = d.iter().map(|&v| v <= limit).collect();
    let removed = keep.iter().filter(|k| !**k).count();
    if removed > 0 {
        log::debug!("outlier removal dropped {removed} of {} points", pc.len());
    }
    Ok(pc.select(&keep))
}
