//! Mean structural similarity over dense sliding windows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::compensated_sum;
use crate::error::{Error, Result};
use crate::geo::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsimParams {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the values, in meters.
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 50.0,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::invalid(format!(
                "SSIM window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.dynamic_range.is_finite() && self.dynamic_range > 0.0) {
            return Err(Error::invalid("SSIM dynamic range must be > 0"));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(Error::invalid("SSIM constants must be > 0"));
        }
        Ok(())
    }
}

/// Mean SSIM over all fully valid windows.
pub fn ssim(a: &Raster, b: &Raster, p: &SsimParams) -> Result<f64> {
    let (mean, windows) = ssim_windows(a, b, p)?;
    if windows == 0 {
        return Err(Error::invalid(
            "no SSIM window is free of nodata in both rasters",
        ));
    }
    Ok(mean)
}

/// Mean SSIM and the number of windows that entered it (0 gives a mean of NaN).
pub fn ssim_windows(a: &Raster, b: &Raster, p: &SsimParams) -> Result<(f64, usize)> {
    p.validate()?;
    a.geometry().ensure_same(b.geometry(), "SSIM inputs")?;
    let (cols, rows, w) = (a.cols(), a.rows(), p.window);
    if cols < w || rows < w {
        return Ok((f64::NAN, 0));
    }
    let x = centered(a);
    let y = centered(b);
    let (c1, c2) = (p.c1(), p.c2());
    let n = (w * w) as f64;

    let per_row: Vec<(f64, usize)> = (0..=rows - w)
        .into_par_iter()
        .map(|top| {
            // Column sums over rows top..top+w.
            let mut cs = vec![[0.0f64; 5]; cols];
            let mut cvalid = vec![0usize; cols];
            for r in top..top + w {
                for c in 0..cols {
                    let i = r * cols + c;
                    if let (Some(xv), Some(yv)) = (x.values[i], y.values[i]) {
                        let s = &mut cs[c];
                        s[0] += xv;
                        s[1] += yv;
                        s[2] += xv * xv;
                        s[3] += yv * yv;
                        s[4] += xv * yv;
                        cvalid[c] += 1;
                    }
                }
            }
            let mut prefix = vec![[0.0f64; 5]; cols + 1];
            let mut pvalid = vec![0usize; cols + 1];
            for c in 0..cols {
                for k in 0..5 {
                    prefix[c + 1][k] = prefix[c][k] + cs[c][k];
                }
                pvalid[c + 1] = pvalid[c] + cvalid[c];
            }
            let mut values = Vec::new();
            for left in 0..=cols - w {
                if pvalid[left + w] - pvalid[left] != w * w {
                    continue;
                }
                let m: Vec<f64> = (0..5).map(|k| (prefix[left + w][k] - prefix[left][k]) / n).collect();
                let mu_x = m[0] + x.shift;
                let mu_y = m[1] + y.shift;
                let var_x = (m[2] - m[0] * m[0]).max(0.0);
                let var_y = (m[3] - m[1] * m[1]).max(0.0);
                let cov = m[4] - m[0] * m[1];
                let num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2);
                let den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2);
                values.push((num / den).clamp(-1.0, 1.0));
            }
            (compensated_sum(values.iter().copied()), values.len())
        })
        .collect();

    let windows: usize = per_row.iter().map(|(_, k)| k).sum();
    let total = compensated_sum(per_row.iter().map(|(s, _)| *s));
    Ok((total / windows as f64, windows))
}

struct Centered {
    shift: f64,
    values: Vec<Option<f64>>,
}

// Valid values minus their mean, which keeps the window moments well
// conditioned.
fn centered(r: &Raster) -> Centered {
    let n = r.valid_count();
    let shift = if n == 0 {
        0.0
    } else {
        compensated_sum((0..r.geometry().len()).filter_map(|i| r.valid(i).map(f64::from))) / n as f64
    };
    Centered {
        shift,
        values: (0..r.geometry().len())
            .map(|i| r.valid(i).map(|v| v as f64 - shift))
            .collect(),
    }
}
