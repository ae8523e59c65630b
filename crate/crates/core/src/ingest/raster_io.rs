//! Raster file formats.
//!
//! `.chmr` binary container, little-endian:
//!
//! | offset | type   | field                          |
//! |--------|--------|--------------------------------|
//! | 0      | [u8;4] | magic `CHMR`                   |
//! | 4      | u16    | version = 1                    |
//! | 6      | u32    | cols                           |
//! | 10     | u32    | rows                           |
//! | 14     | f64    | origin_x (upper-left corner)   |
//! | 22     | f64    | origin_y (upper-left corner)   |
//! | 30     | f64    | pixel_size                     |
//! | 38     | u8     | crs kind (0 geographic, 1 UTM) |
//! | 39     | i16    | UTM zone (0 when geographic)   |
//! | 41     | u8     | hemisphere (0 N, 1 S)          |
//! | 42     | f32    | nodata                         |
//! | 46     | f32[]  | rows x cols values, row-major  |
//!
//! ESRI ASCII grids are also supported; they carry no CRS, so the caller
//! supplies one.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geo::{Crs, GridGeometry, Hemisphere, Raster};
use crate::ingest::GeoSidecar;

pub const CHMR_HEADER_SIZE: usize = 46;
const CHMR_MAGIC: &[u8; 4] = b"CHMR";
const CHMR_VERSION: u16 = 1;

fn fmt_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        format: "chmr",
        offset,
        message: message.into(),
    }
}

pub fn write_chmr(r: &Raster) -> Vec<u8> {
    let g = r.geometry();
    let mut out = Vec::with_capacity(CHMR_HEADER_SIZE + 4 * g.len());
    out.extend_from_slice(CHMR_MAGIC);
    out.extend_from_slice(&CHMR_VERSION.to_le_bytes());
    out.extend_from_slice(&(g.cols() as u32).to_le_bytes());
    out.extend_from_slice(&(g.rows() as u32).to_le_bytes());
    out.extend_from_slice(&g.origin_x().to_le_bytes());
    out.extend_from_slice(&g.origin_y().to_le_bytes());
    out.extend_from_slice(&g.pixel_size().to_le_bytes());
    let (kind, zone, hemi) = match g.crs() {
        Crs::GeographicWgs84 => (0u8, 0i16, 0u8),
        Crs::Utm { zone, hemisphere } => (
            1,
            zone as i16,
            match hemisphere {
                Hemisphere::North => 0,
                Hemisphere::South => 1,
            },
        ),
    };
    out.push(kind);
    out.extend_from_slice(&zone.to_le_bytes());
    out.push(hemi);
    out.extend_from_slice(&r.nodata().to_le_bytes());
    for v in r.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_chmr(bytes: &[u8]) -> Result<Raster> {
    if bytes.len() < 4 || &bytes[..4] != CHMR_MAGIC {
        return Err(fmt_err(0, "bad magic, expected CHMR"));
    }
    if bytes.len() < CHMR_HEADER_SIZE {
        return Err(fmt_err(bytes.len(), "truncated header"));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());

    let version = u16_at(4);
    if version != CHMR_VERSION {
        return Err(fmt_err(4, format!("unsupported version {version}")));
    }
    let cols = u32_at(6) as usize;
    let rows = u32_at(10) as usize;
    let crs = match bytes[38] {
        0 => {
            if bytes[39..42] != [0, 0, 0] {
                return Err(fmt_err(39, "geographic CRS must have zone 0 and hemisphere 0"));
            }
            Crs::GeographicWgs84
        }
        1 => {
            let zone = i16::from_le_bytes([bytes[39], bytes[40]]);
            let hemi = match bytes[41] {
                0 => Hemisphere::North,
                1 => Hemisphere::South,
                h => return Err(fmt_err(41, format!("bad hemisphere code {h}"))),
            };
            u8::try_from(zone)
                .ok()
                .and_then(|z| Crs::utm(z, hemi).ok())
                .ok_or_else(|| fmt_err(39, format!("bad UTM zone {zone}")))?
        }
        k => return Err(fmt_err(38, format!("bad CRS kind {k}"))),
    };
    let geometry = GridGeometry::new(f64_at(14), f64_at(22), f64_at(30), cols, rows, crs)
        .map_err(|e| fmt_err(6, e.to_string()))?;
    let nodata = f32::from_le_bytes(bytes[42..46].try_into().unwrap());
    let expected = cols
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| fmt_err(6, "grid size overflows"))?;
    let body = &bytes[CHMR_HEADER_SIZE..];
    if body.len() != expected {
        return Err(fmt_err(
            CHMR_HEADER_SIZE,
            format!("header declares {cols}x{rows} values ({expected} bytes), body has {} bytes", body.len()),
        ));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Raster::new(geometry, nodata, values).map_err(|e| fmt_err(CHMR_HEADER_SIZE, e.to_string()))
}

pub fn write_ascii_grid(r: &Raster) -> String {
    let g = r.geometry();
    let mut out = String::new();
    writeln!(out, "ncols {}", g.cols()).unwrap();
    writeln!(out, "nrows {}", g.rows()).unwrap();
    writeln!(out, "xllcorner {}", g.min_x()).unwrap();
    writeln!(out, "yllcorner {}", g.min_y()).unwrap();
    writeln!(out, "cellsize {}", g.pixel_size()).unwrap();
    writeln!(out, "NODATA_value {}", r.nodata()).unwrap();
    for row in r.values().chunks(g.cols()) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parses an ESRI ASCII grid. Both `xllcorner`/`yllcorner` and
/// `xllcenter`/`yllcenter` headers are accepted; `NODATA_value` defaults to
/// -9999. Cells equal to the declared sentinel become nodata.
pub fn read_ascii_grid(text: &str, crs: Crs) -> Result<Raster> {
    let err = |line: usize, message: String| Error::Line {
        format: "ESRI ASCII grid",
        line,
        message,
    };
    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut center = false;
    let mut cellsize = None;
    let mut nodata = -9999.0f32;
    let mut values: Vec<f32> = Vec::new();
    let mut lines = text.lines().enumerate().peekable();

    while let Some(&(n, line)) = lines.peek() {
        let mut it = line.split_whitespace();
        let Some(key) = it.next() else {
            lines.next();
            continue;
        };
        let key = key.to_ascii_lowercase();
        if !key.starts_with(|c: char| c.is_ascii_alphabetic()) || key == "nan" || key == "inf" {
            break;
        }
        let val = it
            .next()
            .ok_or_else(|| err(n + 1, format!("header {key} has no value")))?;
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| err(n + 1, format!("header {key} value {v:?} is not a number")))
        };
        match key.as_str() {
            "ncols" => ncols = Some(num(val)? as usize),
            "nrows" => nrows = Some(num(val)? as usize),
            "xllcorner" => xll = Some(num(val)?),
            "yllcorner" => yll = Some(num(val)?),
            "xllcenter" => {
                xll = Some(num(val)?);
                center = true;
            }
            "yllcenter" => {
                yll = Some(num(val)?);
                center = true;
            }
            "cellsize" => cellsize = Some(num(val)?),
            "nodata_value" => nodata = num(val)? as f32,
            _ => return Err(err(n + 1, format!("unknown header key {key:?}"))),
        }
        lines.next();
    }
    let missing = |k: &str| err(1, format!("missing header {k}"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let mut xll = xll.ok_or_else(|| missing("xllcorner"))?;
    let mut yll = yll.ok_or_else(|| missing("yllcorner"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    if center {
        xll -= cellsize / 2.0;
        yll -= cellsize / 2.0;
    }
    let mut last_line = 1;
    for (n, line) in lines {
        last_line = n + 1;
        for tok in line.split_whitespace() {
            let v: f32 = tok
                .parse()
                .map_err(|_| err(n + 1, format!("cell value {tok:?} is not a number")))?;
            values.push(v);
        }
    }
    if values.len() != ncols * nrows {
        return Err(err(
            last_line,
            format!("header declares {ncols}x{nrows} cells, found {} values", values.len()),
        ));
    }
    let geometry = GridGeometry::new(xll, yll + nrows as f64 * cellsize, cellsize, ncols, nrows, crs)?;
    Raster::new(geometry, nodata, values)
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Reads a `.chmr` or `.asc` raster. ASCII grids take their CRS from a `.geo`
/// sidecar next to the file when present, else from `crs_hint`.
pub fn read_raster_file(path: &Path, crs_hint: Option<Crs>) -> Result<Raster> {
    match extension(path).as_str() {
        "chmr" => read_chmr(&std::fs::read(path)?),
        "asc" => {
            let sidecar = path.with_extension("geo");
            let crs = if sidecar.exists() {
                GeoSidecar::parse(&std::fs::read_to_string(&sidecar)?)?.crs
            } else {
                crs_hint.ok_or_else(|| {
                    Error::invalid(format!(
                        "{} carries no CRS; supply a .geo sidecar or a CRS hint",
                        path.display()
                    ))
                })?
            };
            read_ascii_grid(&std::fs::read_to_string(path)?, crs)
        }
        other => Err(Error::invalid(format!("unsupported raster extension {other:?}"))),
    }
}

pub fn write_raster_file(path: &Path, r: &Raster) -> Result<()> {
    match extension(path).as_str() {
        "chmr" => std::fs::write(path, write_chmr(r))?,
        "asc" => {
            std::fs::write(path, write_ascii_grid(r))?;
            std::fs::write(path.with_extension("geo"), GeoSidecar::from_geometry(r.geometry()).to_text())?;
        }
        other => return Err(Error::invalid(format!("unsupported raster extension {other:?}"))),
    }
    Ok(())
}
