use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geo::Crs;
use crate::ingest::{PointCloud, PointRecord};

/// Parses whitespace-separated `x y z [class]` lines. `#` starts a comment and
/// blank lines are skipped.
pub fn read_point_text(text: &str, crs: Crs) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let err = |message: String| Error::Line {
            format: "point text",
            line,
            message,
        };
        if fields.len() != 3 && fields.len() != 4 {
            return Err(err(format!("expected 3 or 4 fields, found {}", fields.len())));
        }
        let mut xyz = [0.0f64; 3];
        for (k, f) in fields[..3].iter().enumerate() {
            xyz[k] = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("field {} ({f:?}) is not a finite number", k + 1)))?;
        }
        let classification = match fields.get(3) {
            Some(f) => Some(
                f.parse::<u8>()
                    .map_err(|_| err(format!("class {f:?} is not an integer in 0..=255")))?,
            ),
            None => None,
        };
        points.push(PointRecord {
            x: xyz[0],
            y: xyz[1],
            z: xyz[2],
            classification,
        });
    }
    if points.is_empty() {
        return Err(Error::invalid("point text holds no data lines"));
    }
    PointCloud::new(points, crs)
}

pub fn write_point_text(pc: &PointCloud) -> String {
    let mut out = String::from("# x y z [class]\n");
    for p in pc.points() {
        match p.classification {
            Some(c) => writeln!(out, "{} {} {} {}", p.x, p.y, p.z, c),
            None => writeln!(out, "{} {} {}", p.x, p.y, p.z),
        }
        .unwrap();
    }
    out
}
