//! Cubic-spline gap filling.
//!
//! A nodata cell with valid data on both sides along its row (column) gets a
//! natural cubic spline estimate fitted through that row's (column's) valid
//! cells. Cells with both estimates take their average. Cells with neither
//! lie outside the valid data and copy the nearest valid cell.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geo::Raster;

/// Natural cubic spline through strictly increasing knots.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // Second derivatives at the knots.
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::invalid("spline knots and values differ in length"));
        }
        if xs.len() < 2 {
            return Err(Error::invalid("a spline needs at least 2 knots"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(Error::invalid("spline knots must be finite and strictly increasing"));
        }
        let n = xs.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations; m[0] = m[n-1] = 0.
            let k = n - 2;
            let mut c_prime = vec![0.0; k];
            let mut d_prime = vec![0.0; k];
            for r in 0..k {
                let i = r + 1;
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let a = h0;
                let b = 2.0 * (h0 + h1);
                let c = h1;
                let d = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
                if r == 0 {
                    c_prime[r] = c / b;
                    d_prime[r] = d / b;
                } else {
                    let denom = b - a * c_prime[r - 1];
                    c_prime[r] = c / denom;
                    d_prime[r] = (d - a * d_prime[r - 1]) / denom;
                }
            }
            m[k] = d_prime[k - 1];
            for r in (0..k - 1).rev() {
                m[r + 1] = d_prime[r] - c_prime[r] * m[r + 2];
            }
        }
        Ok(NaturalSpline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        })
    }

    pub fn min_x(&self) -> f64 {
        self.xs[0]
    }

    pub fn max_x(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    /// Spline value at `x`. Outside the knot range the end cubics are used.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = self.xs.partition_point(|&k| k <= x).clamp(1, n - 1) - 1;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let h = x1 - x0;
        let a = x1 - x;
        let b = x - x0;
        m0 * a * a * a / (6.0 * h)
            + m1 * b * b * b / (6.0 * h)
            + (y0 / h - m0 * h / 6.0) * a
            + (y1 / h - m1 * h / 6.0) * b
    }
}

/// How a gap cell was filled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapEstimate {
    /// Spline estimate (row, column, or the average of both), in f64.
    Spline(f64),
    /// Copy of the nearest valid cell (by row-major index).
    Nearest(usize),
}

/// Estimates for every nodata cell of `r`, as `(cell index, estimate)` in
/// row-major order.
pub fn gap_fill_estimates(r: &Raster) -> Result<Vec<(usize, GapEstimate)>> {
    let g = r.geometry();
    let (cols, rows) = (g.cols(), g.rows());
    if r.valid_count() == 0 {
        return Err(Error::invalid("cannot fill gaps in an all-nodata raster"));
    }
    let line_spline = |cells: &mut dyn Iterator<Item = (usize, usize)>| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = cells
            .filter_map(|(pos, i)| r.valid(i).map(|v| (pos as f64, v as f64)))
            .unzip();
        if xs.len() >= 2 {
            NaturalSpline::fit(&xs, &ys).ok()
        } else {
            None
        }
    };
    let row_splines: Vec<Option<NaturalSpline>> = (0..rows)
        .into_par_iter()
        .map(|row| line_spline(&mut (0..cols).map(|c| (c, row * cols + c))))
        .collect();
    let col_splines: Vec<Option<NaturalSpline>> = (0..cols)
        .into_par_iter()
        .map(|col| line_spline(&mut (0..rows).map(|rr| (rr, rr * cols + col))))
        .collect();

    let interior = |s: &Option<NaturalSpline>, pos: usize| {
        s.as_ref()
            .filter(|s| s.min_x() < pos as f64 && (pos as f64) < s.max_x())
            .map(|s| s.eval(pos as f64))
    };
    let valid_mask: Vec<bool> = (0..g.len()).map(|i| r.valid(i).is_some()).collect();
    let gaps: Vec<usize> = (0..g.len()).filter(|&i| !valid_mask[i]).collect();
    Ok(gaps
        .into_par_iter()
        .map(|i| {
            let (col, row) = (i % cols, i / cols);
            let est = match (interior(&row_splines[row], col), interior(&col_splines[col], row)) {
                (Some(a), Some(b)) => GapEstimate::Spline(0.5 * (a + b)),
                (Some(a), None) | (None, Some(a)) => GapEstimate::Spline(a),
                (None, None) => GapEstimate::Nearest(nearest_valid(&valid_mask, cols, rows, col, row)),
            };
            (i, est)
        })
        .collect())
}

/// Fills every nodata cell of `r`; valid cells are copied unchanged.
pub fn fill_gaps_spline(r: &Raster) -> Result<Raster> {
    let estimates = gap_fill_estimates(r)?;
    let mut values = r.values().to_vec();
    for (i, est) in estimates {
        values[i] = match est {
            GapEstimate::Spline(v) => v as f32,
            GapEstimate::Nearest(j) => r.values()[j],
        };
    }
    Raster::new(*r.geometry(), r.nodata(), values)
}

// Euclidean-nearest valid cell by expanding square rings; ties go to the
// lowest row-major index.
fn nearest_valid(valid: &[bool], cols: usize, rows: usize, col: usize, row: usize) -> usize {
    let mut best: Option<(usize, usize)> = None;
    let max_ring = cols.max(rows);
    for d in 1..=max_ring {
        if let Some((b, _)) = best {
            if d * d > b {
                break;
            }
        }
        let (c, r, d) = (col as isize, row as isize, d as isize);
        let mut consider = |cc: isize, rr: isize| {
            if cc < 0 || rr < 0 || cc >= cols as isize || rr >= rows as isize {
                return;
            }
            let k = rr as usize * cols + cc as usize;
            if !valid[k] {
                return;
            }
            let dist = ((cc - c).pow(2) + (rr - r).pow(2)) as usize;
            if best.is_none_or(|(bd, bk)| dist < bd || (dist == bd && k < bk)) {
                best = Some((dist, k));
            }
        };
        for cc in c - d..=c + d {
            consider(cc, r - d);
            consider(cc, r + d);
        }
        for rr in r - d + 1..r + d {
            consider(c - d, rr);
            consider(c + d, rr);
        }
    }
    best.expect("raster has at least one valid cell").1
}
