//! Independent reference implementations shared by integration tests.
#![allow(dead_code)]

use chmkit_core::{GridGeometry, Raster};

/// Mean SSIM by direct per-window evaluation with two-pass moments.
/// Returns `(mean, window_count)`.
pub fn brute_ssim(a: &Raster, b: &Raster, window: usize, k1: f64, k2: f64, l: f64) -> (f64, usize) {
    let (cols, rows) = (a.cols(), a.rows());
    let c1 = (k1 * l) * (k1 * l);
    let c2 = (k2 * l) * (k2 * l);
    let mut total = 0.0;
    let mut count = 0;
    if cols < window || rows < window {
        return (f64::NAN, 0);
    }
    for top in 0..=rows - window {
        for left in 0..=cols - window {
            let mut xs = Vec::with_capacity(window * window);
            let mut ys = Vec::with_capacity(window * window);
            for r in top..top + window {
                for c in left..left + window {
                    let i = r * cols + c;
                    if let (Some(x), Some(y)) = (a.valid(i), b.valid(i)) {
                        xs.push(x as f64);
                        ys.push(y as f64);
                    }
                }
            }
            if xs.len() != window * window {
                continue;
            }
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let vx = xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>() / n;
            let vy = ys.iter().map(|y| (y - my) * (y - my)).sum::<f64>() / n;
            let cxy = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n;
            let s = ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            total += s;
            count += 1;
        }
    }
    (total / count as f64, count)
}

/// Bias, MAE, RMSE of jointly valid cells, straight from the definitions.
pub fn brute_errors(est: &Raster, reference: &Raster) -> (f64, f64, f64, usize) {
    let errs: Vec<f64> = (0..est.geometry().len())
        .filter_map(|i| Some(est.valid(i)? as f64 - reference.valid(i)? as f64))
        .collect();
    let n = errs.len() as f64;
    let bias = errs.iter().sum::<f64>() / n;
    let mae = errs.iter().map(|e| e.abs()).sum::<f64>() / n;
    let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    (bias, mae, rmse, errs.len())
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Tree crown with a dome-shaped top whose apex is `height` above ground.
#[derive(Debug, Clone, Copy)]
pub struct Crown {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub height: f64,
}

/// Synthetic LiDAR scene on a tilted plane: ground everywhere except under a
/// flat-roofed building, three crowns of known height, matching RGB image.
pub struct Scene {
    pub points: Vec<chmkit_core::ingest::PointRecord>,
    pub crowns: Vec<Crown>,
    pub building: [f64; 4],
    pub x0: f64,
    pub y0: f64,
    pub size: f64,
    pub slope_deg: f64,
}

pub const SCENE_X0: f64 = 300_000.0;
pub const SCENE_Y0: f64 = 4_500_000.0;
pub const BUILDING_HEIGHT: f64 = 8.0;

impl Scene {
    pub fn ground_z(&self, x: f64, _y: f64) -> f64 {
        100.0 + self.slope_deg.to_radians().tan() * (x - self.x0)
    }

    fn in_building(&self, x: f64, y: f64) -> bool {
        let [bx0, by0, bx1, by1] = self.building;
        x >= bx0 && x <= bx1 && y >= by0 && y <= by1
    }

    pub fn crown_at(&self, x: f64, y: f64) -> Option<&Crown> {
        self.crowns
            .iter()
            .find(|c| (x - c.cx).hypot(y - c.cy) <= c.radius)
    }

    pub fn cloud(&self, classified: bool, crs: chmkit_core::Crs) -> chmkit_core::ingest::PointCloud {
        let pts = self
            .points
            .iter()
            .map(|p| {
                let mut q = *p;
                if !classified {
                    q.classification = None;
                }
                q
            })
            .collect();
        chmkit_core::ingest::PointCloud::new(pts, crs).unwrap()
    }

    /// RGB image at `pixel` resolution: green over crowns, gray elsewhere.
    pub fn rgb(&self, pixel: f64, crs: chmkit_core::Crs) -> chmkit_core::RgbImage {
        let n = (self.size / pixel).round() as usize;
        let g = GridGeometry::new(self.x0, self.y0 + self.size, pixel, n, n, crs).unwrap();
        let mut img = chmkit_core::RgbImage::filled(g, [128, 128, 128]);
        for i in 0..g.len() {
            let (x, y) = g.cell_center(i % n, i / n);
            if self.crown_at(x, y).is_some() {
                img.set_pixel(i, [40, 160, 40]);
            }
        }
        img
    }
}

/// Builds a 60 m square scene whose crowns sit on centers of 3 m cells.
pub fn crown_scene(seed: u64, slope_deg: f64) -> Scene {
    use chmkit_core::ingest::{class, PointRecord};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (x0, y0, size) = (SCENE_X0, SCENE_Y0, 60.0);
    let crowns = [(13.5, 40.5, 5.0), (31.5, 40.5, 15.0), (49.5, 22.5, 30.0)]
        .iter()
        .map(|&(dx, dy, h)| Crown {
            cx: x0 + dx,
            cy: y0 + dy,
            radius: 4.0,
            height: h,
        })
        .collect();
    let mut scene = Scene {
        points: Vec::new(),
        crowns,
        building: [x0 + 18.0, y0 + 6.0, x0 + 30.0, y0 + 18.0],
        x0,
        y0,
        size,
        slope_deg,
    };
    let step = 0.5;
    let n = (size / step) as usize;
    let mut pts = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let x = x0 + (c as f64 + 0.5) * step + rng.gen_range(-0.1..0.1);
            let y = y0 + (r as f64 + 0.5) * step + rng.gen_range(-0.1..0.1);
            let gz = scene.ground_z(x, y);
            if scene.in_building(x, y) {
                pts.push(PointRecord::with_class(x, y, gz + BUILDING_HEIGHT, class::BUILDING));
                continue;
            }
            pts.push(PointRecord::with_class(x, y, gz, class::GROUND));
            if let Some(cr) = scene.crown_at(x, y) {
                let depth = (0.6 * cr.height).min(3.0);
                let d = (x - cr.cx).hypot(y - cr.cy) / cr.radius;
                let z = gz + cr.height - depth * d * d;
                pts.push(PointRecord::with_class(x, y, z, class::HIGH_VEGETATION));
            }
        }
    }
    for cr in &scene.crowns {
        let z = scene.ground_z(cr.cx, cr.cy) + cr.height;
        pts.push(PointRecord::with_class(cr.cx, cr.cy, z, class::HIGH_VEGETATION));
    }
    scene.points = pts;
    scene
}

/// Largest valid value among cells whose centers fall inside `crown`.
pub fn crown_max(chm: &Raster, crown: &Crown) -> Option<f64> {
    let g = chm.geometry();
    (0..g.len())
        .filter(|&i| {
            let (x, y) = g.cell_center(i % g.cols(), i / g.cols());
            (x - crown.cx).hypot(y - crown.cy) <= crown.radius
        })
        .filter_map(|i| chm.valid(i))
        .map(|v| v as f64)
        .reduce(f64::max)
}
