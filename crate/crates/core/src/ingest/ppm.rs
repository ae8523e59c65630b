//! Binary PPM (`P6`, maxval 255) images with a `.geo` sidecar carrying the
//! georeferencing: four lines holding origin_x, origin_y, pixel_size and CRS.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geo::{Crs, GridGeometry, RgbImage};

fn ppm_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        format: "ppm",
        offset,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoSidecar {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size: f64,
    pub crs: Crs,
}

impl GeoSidecar {
    pub fn from_geometry(g: &GridGeometry) -> Self {
        GeoSidecar {
            origin_x: g.origin_x(),
            origin_y: g.origin_y(),
            pixel_size: g.pixel_size(),
            crs: g.crs(),
        }
    }

    pub fn geometry(&self, cols: usize, rows: usize) -> Result<GridGeometry> {
        GridGeometry::new(self.origin_x, self.origin_y, self.pixel_size, cols, rows, self.crs)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        if lines.len() != 4 {
            return Err(Error::Line {
                format: "geo sidecar",
                line: lines.last().map_or(1, |l| l.0),
                message: format!("expected 4 lines, found {}", lines.len()),
            });
        }
        let num = |(n, l): (usize, &str)| {
            l.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or(Error::Line {
                format: "geo sidecar",
                line: n,
                message: format!("{l:?} is not a finite number"),
            })
        };
        let crs = lines[3].1.parse::<Crs>().map_err(|e| Error::Line {
            format: "geo sidecar",
            line: lines[3].0,
            message: e.to_string(),
        })?;
        Ok(GeoSidecar {
            origin_x: num(lines[0])?,
            origin_y: num(lines[1])?,
            pixel_size: num(lines[2])?,
            crs,
        })
    }

    pub fn to_text(&self) -> String {
        format!(
            "{}\n{}\n{}\n{}\n",
            self.origin_x, self.origin_y, self.pixel_size, self.crs
        )
    }
}

pub fn write_ppm(img: &RgbImage) -> Vec<u8> {
    let g = img.geometry();
    let mut out = format!("P6\n{} {}\n255\n", g.cols(), g.rows()).into_bytes();
    out.extend_from_slice(&img.interleaved());
    out
}

/// Decodes a binary PPM and places it with `geo`.
pub fn read_ppm(bytes: &[u8], geo: &GeoSidecar) -> Result<RgbImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(ppm_err(0, "expected binary PPM magic P6"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (k, field) in fields.iter_mut().enumerate() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(ppm_err(pos, format!("expected header number {}", k + 1)));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| ppm_err(start, "header number out of range"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(ppm_err(pos, format!("unsupported maxval {maxval}, only 255")));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(ppm_err(pos, "missing whitespace after maxval")),
    }
    let data = &bytes[pos..];
    if data.len() != width * height * 3 {
        return Err(ppm_err(
            pos,
            format!("expected {} pixel bytes, found {}", width * height * 3, data.len()),
        ));
    }
    let geometry = geo.geometry(width, height)?;
    RgbImage::from_interleaved(geometry, data)
}

/// Reads `path` (PPM) and its `.geo` sidecar.
pub fn read_rgb_file(path: &Path) -> Result<RgbImage> {
    let geo = GeoSidecar::parse(&std::fs::read_to_string(path.with_extension("geo"))?)?;
    read_ppm(&std::fs::read(path)?, &geo)
}

/// Writes `path` (PPM) and its `.geo` sidecar.
pub fn write_rgb_file(path: &Path, img: &RgbImage) -> Result<()> {
    std::fs::write(path, write_ppm(img))?;
    std::fs::write(
        path.with_extension("geo"),
        GeoSidecar::from_geometry(img.geometry()).to_text(),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Hemisphere;

    fn geo() -> GeoSidecar {
        GeoSidecar {
            origin_x: 300_000.0,
            origin_y: 4_500_000.0,
            pixel_size: 3.0,
            crs: Crs::utm(18, Hemisphere::North).unwrap(),
        }
    }

    #[test]
    fn two_pixel_round_trip() {
        let bytes = b"P6\n2 1\n255\n\xff\x00\x00\x00\xff\x00".to_vec();
        let img = read_ppm(&bytes, &geo()).unwrap();
        assert_eq!(img.pixel(0), [255, 0, 0]);
        assert_eq!(img.pixel(1), [0, 255, 0]);
        assert_eq!(write_ppm(&img), bytes);
    }

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P6 # made by hand\n1 1\n255\n\x01\x02\x03".to_vec();
        assert_eq!(read_ppm(&bytes, &geo()).unwrap().pixel(0), [1, 2, 3]);
    }

    #[test]
    fn rejects_ascii_ppm_and_wide_maxval() {
        assert!(matches!(
            read_ppm(b"P3\n1 1\n255\n0 0 0\n", &geo()),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(read_ppm(b"P6\n1 1\n65535\n\0\0\0\0\0\0", &geo()).is_err());
        assert!(read_ppm(b"P6\n2 1\n255\n\0\0\0", &geo()).is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let g = geo();
        assert_eq!(GeoSidecar::parse(&g.to_text()).unwrap(), g);
        assert!(GeoSidecar::parse("1\n2\n3\n").is_err());
        assert!(GeoSidecar::parse("1\n2\nx\nutm:18N\n").is_err());
        assert!(GeoSidecar::parse("1\n2\n3\nutm:99N\n").is_err());
    }
}
