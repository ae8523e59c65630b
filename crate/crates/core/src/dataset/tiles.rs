//! Paired RGB / label tile export with a tab-separated manifest.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geo::{Raster, RgbImage};
use crate::ingest::{write_raster_file, write_rgb_file};

pub const MANIFEST_FILE: &str = "manifest.tsv";
const MANIFEST_HEADER: &str = "# tile_id\trgb_path\tlabel_path\torigin_x\torigin_y\tvalid_fraction";

#[derive(Debug, Clone, PartialEq)]
pub struct TileEntry {
    pub tile_id: String,
    /// Relative to the manifest directory.
    pub rgb_path: PathBuf,
    pub label_path: PathBuf,
    pub origin_x: f64,
    pub origin_y: f64,
    pub valid_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileManifest {
    pub tile_size: usize,
    pub max_nodata_fraction: f64,
    pub entries: Vec<TileEntry>,
    /// Ids of tiles dropped for exceeding the nodata limit.
    pub skipped: Vec<String>,
}

impl TileManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                e.tile_id,
                e.rgb_path.display(),
                e.label_path.display(),
                e.origin_x,
                e.origin_y,
                e.valid_fraction
            ));
        }
        out
    }
}

/// Parses manifest rows (tile size and limits are not stored in the file).
pub fn read_tile_manifest(text: &str) -> Result<Vec<TileEntry>> {
    let bad = |line: usize, message: String| Error::Line {
        format: "tile manifest",
        line,
        message,
    };
    let mut entries = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = raw.split('\t').collect();
        if f.len() != 6 {
            return Err(bad(line, format!("expected 6 fields, found {}", f.len())));
        }
        let num = |s: &str, name: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(line, format!("invalid {name} {s:?}")))
        };
        entries.push(TileEntry {
            tile_id: f[0].to_string(),
            rgb_path: f[1].into(),
            label_path: f[2].into(),
            origin_x: num(f[3], "origin_x")?,
            origin_y: num(f[4], "origin_y")?,
            valid_fraction: num(f[5], "valid_fraction")?,
        });
    }
    Ok(entries)
}

/// Cuts `rgb` and `label` into non-overlapping `tile_size` squares from the
/// upper-left corner (partial tiles are dropped), skips tiles whose label
/// nodata fraction exceeds `max_nodata_fraction`, and writes
/// `tile_{row}_{col}.ppm/.geo/.chmr` plus `manifest.tsv` into `out_dir`.
pub fn export_tiles(
    rgb: &RgbImage,
    label: &Raster,
    tile_size: usize,
    max_nodata_fraction: f64,
    out_dir: &Path,
) -> Result<TileManifest> {
    rgb.geometry().ensure_same(label.geometry(), "RGB image and label raster")?;
    if tile_size == 0 {
        return Err(Error::invalid("tile size must be > 0"));
    }
    if !(0.0..=1.0).contains(&max_nodata_fraction) {
        return Err(Error::invalid(format!(
            "max nodata fraction must be in [0, 1], got {max_nodata_fraction}"
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    let g = label.geometry();
    let (tiles_x, tiles_y) = (g.cols() / tile_size, g.rows() / tile_size);
    let cells = (tile_size * tile_size) as f64;

    let results: Vec<Result<Option<TileEntry>>> = (0..tiles_x * tiles_y)
        .into_par_iter()
        .map(|t| {
            let (tr, tc) = (t / tiles_x, t % tiles_x);
            let (col0, row0) = (tc * tile_size, tr * tile_size);
            let lab = label.window(col0, row0, tile_size, tile_size)?;
            let valid_fraction = lab.valid_count() as f64 / cells;
            if 1.0 - valid_fraction > max_nodata_fraction {
                return Ok(None);
            }
            let id = tile_id(tr, tc);
            let rgb_path = PathBuf::from(format!("{id}.ppm"));
            let label_path = PathBuf::from(format!("{id}.chmr"));
            write_rgb_file(&out_dir.join(&rgb_path), &rgb.window(col0, row0, tile_size, tile_size)?)?;
            write_raster_file(&out_dir.join(&label_path), &lab)?;
            Ok(Some(TileEntry {
                tile_id: id,
                rgb_path,
                label_path,
                origin_x: lab.geometry().origin_x(),
                origin_y: lab.geometry().origin_y(),
                valid_fraction,
            }))
        })
        .collect();

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        match r? {
            Some(e) => entries.push(e),
            None => skipped.push(tile_id(t / tiles_x, t % tiles_x)),
        }
    }
    let manifest = TileManifest {
        tile_size,
        max_nodata_fraction,
        entries,
        skipped,
    };
    std::fs::write(out_dir.join(MANIFEST_FILE), manifest.to_text())?;
    log::info!(
        "exported {} tiles ({} skipped) to {}",
        manifest.entries.len(),
        manifest.skipped.len(),
        out_dir.display()
    );
    Ok(manifest)
}

fn tile_id(row: usize, col: usize) -> String {
    format!("tile_{row}_{col}")
}
