//! Cloth simulation filter.
//!
//! The cloud is turned upside down and a rigid particle grid ("cloth") is
//! dropped onto it. Each particle falls by a fixed gravity displacement per
//! iteration, is pinned once it reaches the inverted surface below it, and is
//! tied to its four neighbours by internal constraints. Points close to the
//! settled cloth are ground.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::PointCloud;

/// Gravitational acceleration of the cloth, in cloth units per time step².
const GRAVITY: f64 = 0.2;
/// Initial cloth height above the highest inverted point.
const CLOTH_START_OFFSET: f64 = 5.0;
/// Particle rows/columns added around the cloud footprint.
const CLOTH_BUFFER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsfParams {
    pub cloth_resolution: f64,
    pub rigidness: u8,
    pub time_step: f64,
    pub class_threshold: f64,
    pub max_iterations: usize,
    pub convergence_delta: f64,
}

impl Default for CsfParams {
    fn default() -> Self {
        CsfParams {
            cloth_resolution: 1.0,
            rigidness: 2,
            time_step: 0.65,
            class_threshold: 0.5,
            max_iterations: 500,
            convergence_delta: 0.005,
        }
    }
}

impl CsfParams {
    /// Downward displacement applied to every movable particle per iteration.
    pub fn gravity_displacement(&self) -> f64 {
        GRAVITY * self.time_step * self.time_step
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("CSF {name} must be > 0, got {v}")))
            }
        };
        positive("cloth_resolution", self.cloth_resolution)?;
        positive("time_step", self.time_step)?;
        positive("class_threshold", self.class_threshold)?;
        positive("convergence_delta", self.convergence_delta)?;
        if !(1..=3).contains(&self.rigidness) {
            return Err(Error::invalid(format!(
                "CSF rigidness must be 1, 2 or 3, got {}",
                self.rigidness
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("CSF max_iterations must be >= 1"));
        }
        Ok(())
    }
}

/// Per-point ground flags, aligned with the classified cloud.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundLabels(Vec<bool>);

impl GroundLabels {
    pub fn new(flags: Vec<bool>) -> Self {
        GroundLabels(flags)
    }
    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn ground_count(&self) -> usize {
        self.0.iter().filter(|g| **g).count()
    }
    pub fn non_ground(&self) -> Vec<bool> {
        self.0.iter().map(|g| !g).collect()
    }
}

/// Settled cloth. Heights are stored in the inverted frame.
#[derive(Debug, Clone)]
pub struct Cloth {
    x0: f64,
    y0: f64,
    resolution: f64,
    nx: usize,
    ny: usize,
    heights: Vec<f64>,
    iterations: usize,
    converged: bool,
}

impl Cloth {
    pub fn iterations(&self) -> usize {
        self.iterations
    }
    pub fn converged(&self) -> bool {
        self.converged
    }
    pub fn size(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Bilinearly interpolated cloth elevation at (`x`, `y`), in the original
    /// (non-inverted) frame. Positions outside the cloth are clamped to it.
    pub fn surface_z(&self, x: f64, y: f64) -> f64 {
        let fx = ((x - self.x0) / self.resolution).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((y - self.y0) / self.resolution).clamp(0.0, (self.ny - 1) as f64);
        let i0 = (fx.floor() as usize).min(self.nx - 2);
        let j0 = (fy.floor() as usize).min(self.ny - 2);
        let tx = fx - i0 as f64;
        let ty = fy - j0 as f64;
        let h = |i: usize, j: usize| self.heights[j * self.nx + i];
        let top = h(i0, j0) * (1.0 - tx) + h(i0 + 1, j0) * tx;
        let bottom = h(i0, j0 + 1) * (1.0 - tx) + h(i0 + 1, j0 + 1) * tx;
        -(top * (1.0 - ty) + bottom * ty)
    }

    /// A point is ground iff its vertical distance to the cloth is below
    /// `class_threshold`.
    pub fn classify(&self, pc: &PointCloud, class_threshold: f64) -> GroundLabels {
        GroundLabels(
            pc.points()
                .iter()
                .map(|p| (p.z - self.surface_z(p.x, p.y)).abs() < class_threshold)
                .collect(),
        )
    }
}

/// Runs the cloth simulation over `pc` and returns the settled cloth.
pub fn simulate_cloth(pc: &PointCloud, params: &CsfParams) -> Result<Cloth> {
    params.validate()?;
    let b = pc.bounds();
    if b.max_x - b.min_x <= 0.0 && b.max_y - b.min_y <= 0.0 {
        return Err(Error::invalid(
            "degenerate cloud: every point has the same x/y position",
        ));
    }
    let res = params.cloth_resolution;
    let buffer = CLOTH_BUFFER as f64 * res;
    let x0 = b.min_x - buffer;
    let y0 = b.min_y - buffer;
    // Particles covering the footprint. The buffer ring around it has no
    // surface below, is never pinned and hangs from the footprint edges.
    let data_x = ((b.max_x - b.min_x) / res).ceil() as usize + 1;
    let data_y = ((b.max_y - b.min_y) / res).ceil() as usize + 1;
    let nx = data_x + 2 * CLOTH_BUFFER;
    let ny = data_y + 2 * CLOTH_BUFFER;
    let n = nx * ny;

    // Highest inverted point under each particle (nearest-particle binning).
    let mut collision = vec![f64::NEG_INFINITY; n];
    for p in pc.points() {
        let i = ((p.x - x0) / res).round() as usize;
        let j = ((p.y - y0) / res).round() as usize;
        let c = &mut collision[j * nx + i];
        *c = c.max(-p.z);
    }
    let footprint = Footprint {
        i0: CLOTH_BUFFER,
        i1: CLOTH_BUFFER + data_x,
        j0: CLOTH_BUFFER,
        j1: CLOTH_BUFFER + data_y,
    };
    fill_empty_columns(&mut collision, nx, &footprint);

    let start = -b.min_z + CLOTH_START_OFFSET;
    let mut heights = vec![start; n];
    let mut movable = vec![true; n];
    let mut previous = heights.clone();
    let gravity = params.gravity_displacement();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < params.max_iterations {
        iterations += 1;
        previous.copy_from_slice(&heights);

        for (h, m) in heights.iter_mut().zip(&movable) {
            if *m {
                *h -= gravity;
            }
        }
        for k in 0..n {
            if movable[k] && heights[k] <= collision[k] {
                heights[k] = collision[k];
                movable[k] = false;
            }
        }
        for _ in 0..params.rigidness {
            for j in 0..ny {
                for i in 0..nx - 1 {
                    satisfy_constraint(&mut heights, &movable, j * nx + i, j * nx + i + 1);
                }
            }
            for j in 0..ny - 1 {
                for i in 0..nx {
                    satisfy_constraint(&mut heights, &movable, j * nx + i, (j + 1) * nx + i);
                }
            }
        }

        let mut max_disp: f64 = 0.0;
        for j in footprint.j0..footprint.j1 {
            for k in j * nx + footprint.i0..j * nx + footprint.i1 {
                max_disp = max_disp.max((heights[k] - previous[k]).abs());
            }
        }
        if max_disp < params.convergence_delta {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "cloth did not converge within {} iterations; consider raising max_iterations",
            params.max_iterations
        );
    }

    Ok(Cloth {
        x0,
        y0,
        resolution: res,
        nx,
        ny,
        heights,
        iterations,
        converged,
    })
}

/// Labels ground points of `pc` with the cloth simulation filter.
pub fn csf_classify(pc: &PointCloud, params: &CsfParams) -> Result<GroundLabels> {
    let cloth = simulate_cloth(pc, params)?;
    Ok(cloth.classify(pc, params.class_threshold))
}

// Moves movable endpoints toward each other by half their height difference.
fn satisfy_constraint(h: &mut [f64], movable: &[bool], a: usize, b: usize) {
    let (ma, mb) = (movable[a], movable[b]);
    if !ma && !mb {
        return;
    }
    let half = 0.5 * (h[b] - h[a]);
    if ma {
        h[a] += half;
    }
    if mb {
        h[b] -= half;
    }
}

struct Footprint {
    i0: usize,
    i1: usize,
    j0: usize,
    j1: usize,
}

impl Footprint {
    fn contains(&self, i: usize, j: usize) -> bool {
        (self.i0..self.i1).contains(&i) && (self.j0..self.j1).contains(&j)
    }
}

// Footprint particles without points take the collision height of the nearest
// particle that has one (breadth-first over the 4-neighbourhood).
fn fill_empty_columns(collision: &mut [f64], nx: usize, fp: &Footprint) {
    let mut queue: VecDeque<usize> = (0..collision.len())
        .filter(|&k| collision[k].is_finite())
        .collect();
    while let Some(k) = queue.pop_front() {
        let (i, j) = (k % nx, k / nx);
        let mut visit = |qi: usize, qj: usize| {
            let q = qj * nx + qi;
            if fp.contains(qi, qj) && !collision[q].is_finite() {
                collision[q] = collision[k];
                queue.push_back(q);
            }
        };
        if i > 0 {
            visit(i - 1, j);
        }
        visit(i + 1, j);
        if j > 0 {
            visit(i, j - 1);
        }
        visit(i, j + 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{Crs, Hemisphere};
    use crate::ingest::PointRecord;

    fn crs() -> Crs {
        Crs::utm(33, Hemisphere::North).unwrap()
    }

    fn plane(n: usize, slope_deg: f64) -> Vec<PointRecord> {
        let t = slope_deg.to_radians().tan();
        (0..n * n)
            .map(|k| {
                let (x, y) = ((k % n) as f64, (k / n) as f64);
                PointRecord::new(x, y, 100.0 + t * x)
            })
            .collect()
    }

    #[test]
    fn flat_plane_is_all_ground() {
        let pc = PointCloud::new(plane(100, 0.0), crs()).unwrap();
        let labels = csf_classify(&pc, &CsfParams::default()).unwrap();
        assert_eq!(labels.ground_count(), 10_000);
    }

    #[test]
    fn canopy_points_above_plane_are_not_ground() {
        let mut pts = plane(100, 0.0);
        for k in 0..100 {
            pts.push(PointRecord::new(20.0 + (k % 10) as f64 * 0.7, 40.0 + (k / 10) as f64 * 0.7, 110.0));
        }
        let pc = PointCloud::new(pts, crs()).unwrap();
        let labels = csf_classify(&pc, &CsfParams::default()).unwrap();
        let flags = labels.as_slice();
        assert!(flags[..10_000].iter().all(|g| *g));
        assert!(flags[10_000..].iter().all(|g| !*g));
    }

    #[test]
    fn steep_planes_are_recovered() {
        for slope in [10.0, 20.0, 30.0] {
            let pc = PointCloud::new(plane(40, slope), crs()).unwrap();
            let labels = csf_classify(&pc, &CsfParams::default()).unwrap();
            assert_eq!(labels.ground_count(), pc.len(), "slope {slope}");
        }
    }

    #[test]
    fn diagonal_slope() {
        let t = 25f64.to_radians().tan() / 2f64.sqrt();
        let pts = (0..900)
            .map(|k| {
                let (x, y) = ((k % 30) as f64, (k / 30) as f64);
                PointRecord::new(x, y, 50.0 - t * (x + y))
            })
            .collect();
        let pc = PointCloud::new(pts, crs()).unwrap();
        let labels = csf_classify(&pc, &CsfParams::default()).unwrap();
        assert_eq!(labels.ground_count(), 900);
    }

    #[test]
    fn threshold_is_monotone() {
        let mut pts = plane(30, 5.0);
        for k in 0..60 {
            pts.push(PointRecord::new((k % 30) as f64 + 0.3, (k / 30) as f64 * 7.0 + 3.0, 100.5 + k as f64 * 0.05));
        }
        let pc = PointCloud::new(pts, crs()).unwrap();
        let cloth = simulate_cloth(&pc, &CsfParams::default()).unwrap();
        let mut prev = 0;
        for t in [0.1, 0.3, 0.5, 1.0, 2.0, 5.0] {
            let labels = cloth.classify(&pc, t);
            assert!(labels.ground_count() >= prev);
            prev = labels.ground_count();
        }
    }

    #[test]
    fn degenerate_and_bad_params() {
        let pc = PointCloud::new(vec![PointRecord::new(1.0, 1.0, 0.0); 3], crs()).unwrap();
        assert!(csf_classify(&pc, &CsfParams::default()).is_err());
        let pc = PointCloud::new(plane(5, 0.0), crs()).unwrap();
        let bad = CsfParams {
            rigidness: 4,
            ..CsfParams::default()
        };
        assert!(csf_classify(&pc, &bad).is_err());
    }

    #[test]
    fn deterministic() {
        let mut pts = plane(30, 8.0);
        pts.push(PointRecord::new(12.2, 13.7, 130.0));
        let pc = PointCloud::new(pts, crs()).unwrap();
        let a = csf_classify(&pc, &CsfParams::default()).unwrap();
        let b = csf_classify(&pc, &CsfParams::default()).unwrap();
        assert_eq!(a, b);
    }
}
