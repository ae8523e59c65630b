//! Evaluation reports and descriptive statistics of CHM rasters.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::{bias, error_distribution, histogram, mae, rmse, ssim_windows, HistBin, PairedSamples, SsimParams};
use crate::error::{Error, Result};
use crate::geo::Raster;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub n_valid: usize,
    pub bias: f64,
    pub mae: f64,
    pub rmse: f64,
    /// `None` when no window is free of nodata.
    pub ssim: Option<f64>,
    pub ssim_windows: usize,
    pub frac_within: Vec<(f64, f64)>,
    pub frac_negative: f64,
    pub frac_nonnegative: f64,
    pub histogram: Vec<HistBin>,
}

impl MetricReport {
    /// `key=value` lines; the histogram is left to [`MetricReport::histogram_csv`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n_valid={}", self.n_valid);
        let _ = writeln!(out, "bias={}", self.bias);
        let _ = writeln!(out, "mae={}", self.mae);
        let _ = writeln!(out, "rmse={}", self.rmse);
        match self.ssim {
            Some(s) => {
                let _ = writeln!(out, "ssim={s}");
            }
            None => out.push_str("ssim=none\n"),
        }
        let _ = writeln!(out, "ssim_windows={}", self.ssim_windows);
        for (w, f) in &self.frac_within {
            let _ = writeln!(out, "frac_within_{w}={f}");
        }
        let _ = writeln!(out, "frac_negative={}", self.frac_negative);
        let _ = writeln!(out, "frac_nonnegative={}", self.frac_nonnegative);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One `lower,upper,count` line per 1 m error bin.
    pub fn histogram_csv(&self) -> String {
        self.histogram
            .iter()
            .map(|b| format!("{},{},{}\n", b.lower, b.upper, b.count))
            .collect()
    }
}

/// All metrics for `est` against `reference` over their jointly valid cells.
pub fn compose_report(
    est: &Raster,
    reference: &Raster,
    p: &SsimParams,
    half_widths: &[f64],
) -> Result<MetricReport> {
    let s = PairedSamples::from_rasters(est, reference)?;
    let dist = error_distribution(&s, half_widths)?;
    let (mean_ssim, windows) = ssim_windows(est, reference, p)?;
    Ok(MetricReport {
        n_valid: s.len(),
        bias: bias(&s),
        mae: mae(&s),
        rmse: rmse(&s),
        ssim: (windows > 0).then_some(mean_ssim),
        ssim_windows: windows,
        frac_within: dist.frac_within,
        frac_negative: dist.frac_negative,
        frac_nonnegative: dist.frac_nonnegative,
        histogram: dist.histogram,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassFraction {
    pub class: i64,
    pub count: usize,
    pub fraction: f64,
}

/// Share of each land-cover class among cells where `sample_mask` is valid
/// and non-zero. Class values must be integers.
pub fn composition_analysis(landcover: &Raster, sample_mask: &Raster) -> Result<Vec<ClassFraction>> {
    landcover
        .geometry()
        .ensure_same(sample_mask.geometry(), "land cover and sample mask")?;
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for i in 0..landcover.geometry().len() {
        if !matches!(sample_mask.valid(i), Some(m) if m != 0.0) {
            continue;
        }
        let Some(c) = landcover.valid(i) else {
            continue;
        };
        if c.fract() != 0.0 {
            return Err(Error::invalid(format!("land cover value {c} at cell {i} is not a class code")));
        }
        *counts.entry(c as i64).or_default() += 1;
    }
    let total: usize = counts.values().sum();
    if total == 0 {
        return Err(Error::invalid("sample mask selects no land-cover cells"));
    }
    Ok(counts
        .into_iter()
        .map(|(class, count)| ClassFraction {
            class,
            count,
            fraction: count as f64 / total as f64,
        })
        .collect())
}

/// Histogram of CHM values strictly above 0, bins `[k·w, (k+1)·w)` from 0.
pub fn chm_histogram(chm: &Raster, bin_width: f64) -> Result<Vec<HistBin>> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::invalid(format!("bin width must be > 0, got {bin_width}")));
    }
    let positive = (0..chm.geometry().len())
        .filter_map(|i| chm.valid(i))
        .filter(|v| *v > 0.0)
        .map(f64::from);
    let mut bins = histogram(positive, bin_width);
    if let Some(first) = bins.first() {
        // Start the table at 0 so cumulative shares read off directly.
        let missing = (first.lower / bin_width).round() as i64;
        let lead: Vec<HistBin> = (0..missing)
            .map(|k| HistBin {
                lower: k as f64 * bin_width,
                upper: (k + 1) as f64 * bin_width,
                count: 0,
            })
            .collect();
        bins.splice(0..0, lead);
    }
    Ok(bins)
}
