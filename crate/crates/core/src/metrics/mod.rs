//! Accuracy metrics for estimated versus reference canopy heights.

mod report;
mod ssim;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geo::Raster;

pub use report::{chm_histogram, compose_report, composition_analysis, ClassFraction, MetricReport};
pub use ssim::{ssim, ssim_windows, SsimParams};

/// Neumaier-compensated sum in iteration order.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Co-located estimate / reference pairs (at least one).
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSamples {
    est: Vec<f64>,
    reference: Vec<f64>,
}

impl PairedSamples {
    pub fn new(est: Vec<f64>, reference: Vec<f64>) -> Result<Self> {
        if est.len() != reference.len() {
            return Err(Error::invalid(format!(
                "{} estimates but {} references",
                est.len(),
                reference.len()
            )));
        }
        if est.is_empty() {
            return Err(Error::invalid("no samples to evaluate"));
        }
        if est.iter().chain(&reference).any(|v| !v.is_finite()) {
            return Err(Error::invalid("samples must be finite"));
        }
        Ok(PairedSamples { est, reference })
    }

    /// Cells valid in both rasters, in row-major order.
    pub fn from_rasters(est: &Raster, reference: &Raster) -> Result<Self> {
        est.geometry()
            .ensure_same(reference.geometry(), "estimate and reference rasters")?;
        let (e, r): (Vec<f64>, Vec<f64>) = (0..est.geometry().len())
            .filter_map(|i| Some((est.valid(i)? as f64, reference.valid(i)? as f64)))
            .unzip();
        if e.is_empty() {
            return Err(Error::invalid("estimate and reference share no valid cells"));
        }
        PairedSamples::new(e, r)
    }

    pub fn len(&self) -> usize {
        self.est.len()
    }

    pub fn is_empty(&self) -> bool {
        self.est.is_empty()
    }

    /// Errors ŷ − y.
    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.est.iter().zip(&self.reference).map(|(e, r)| e - r)
    }

    fn mean_of(&self, f: impl Fn(f64) -> f64) -> f64 {
        compensated_sum(self.errors().map(f)) / self.len() as f64
    }
}

/// Mean signed error; positive means overestimation.
pub fn bias(s: &PairedSamples) -> f64 {
    s.mean_of(|e| e)
}

pub fn mae(s: &PairedSamples) -> f64 {
    s.mean_of(f64::abs)
}

pub fn rmse(s: &PairedSamples) -> f64 {
    s.mean_of(|e| e * e).sqrt()
}

/// One fixed-width histogram bin `[lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Contiguous bins of width `width` spanning every value.
pub(crate) fn histogram(values: impl IntoIterator<Item = f64>, width: f64) -> Vec<HistBin> {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for v in values {
        *counts.entry((v / width).floor() as i64).or_default() += 1;
    }
    let (Some((&lo, _)), Some((&hi, _))) = (counts.first_key_value(), counts.last_key_value()) else {
        return Vec::new();
    };
    (lo..=hi)
        .map(|k| HistBin {
            lower: k as f64 * width,
            upper: (k + 1) as f64 * width,
            count: counts.get(&k).copied().unwrap_or(0),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorDistribution {
    /// `(half_width, fraction with |error| <= half_width)`.
    pub frac_within: Vec<(f64, f64)>,
    /// Fraction with error < 0.
    pub frac_negative: f64,
    /// Fraction with error >= 0.
    pub frac_nonnegative: f64,
    /// 1 m bins of ŷ − y.
    pub histogram: Vec<HistBin>,
}

pub fn error_distribution(s: &PairedSamples, half_widths: &[f64]) -> Result<ErrorDistribution> {
    if half_widths.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("half-widths must be finite and >= 0"));
    }
    let n = s.len() as f64;
    let frac_within = half_widths
        .iter()
        .map(|&w| (w, s.errors().filter(|e| e.abs() <= w).count() as f64 / n))
        .collect();
    let negative = s.errors().filter(|e| *e < 0.0).count();
    Ok(ErrorDistribution {
        frac_within,
        frac_negative: negative as f64 / n,
        frac_nonnegative: (s.len() - negative) as f64 / n,
        histogram: histogram(s.errors(), 1.0),
    })
}
