use std::collections::HashMap;
use std::fmt::Write as _;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::ingest::ImageMeta;

const COLUMNS: [&str; 6] = [
    "id",
    "date",
    "cloud_cover",
    "sun_elevation",
    "view_angle",
    "hemisphere",
];

/// Parses the tab-separated image metadata table. The first non-empty line
/// is a `#` header naming the columns; their order is free.
pub fn read_image_meta_table(text: &str) -> Result<Vec<ImageMeta>> {
    let err = |line: usize, message: String| Error::Line {
        format: "image metadata",
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty table".into()))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| err(hline, "header line must start with '#'".into()))?;
    let names: Vec<String> = header.split('\t').map(|s| s.trim().to_ascii_lowercase()).collect();
    let mut col = HashMap::new();
    for required in COLUMNS {
        let idx = names
            .iter()
            .position(|n| n == required)
            .ok_or_else(|| err(hline, format!("missing column {required:?}")))?;
        col.insert(required, idx);
    }

    let mut out = Vec::new();
    for (n, line) in lines {
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(err(n, format!("expected {} fields, found {}", names.len(), fields.len())));
        }
        let get = |k: &str| fields[col[k]];
        let num = |k: &str| {
            get(k)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(n, format!("{k} {:?} is not a finite number", get(k))))
        };
        let meta = ImageMeta {
            id: get("id").to_string(),
            acquisition_date: NaiveDate::parse_from_str(get("date"), "%Y-%m-%d")
                .map_err(|e| err(n, format!("date {:?}: {e}", get("date"))))?,
            cloud_cover: num("cloud_cover")?,
            sun_elevation: num("sun_elevation")?,
            view_angle: num("view_angle")?,
            hemisphere: get("hemisphere").parse().map_err(|e: Error| err(n, e.to_string()))?,
        };
        meta.validate().map_err(|e| err(n, e.to_string()))?;
        out.push(meta);
    }
    Ok(out)
}

pub fn write_image_meta_table(rows: &[ImageMeta]) -> String {
    let mut out = format!("#{}\n", COLUMNS.join("\t"));
    for m in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            m.id,
            m.acquisition_date.format("%Y-%m-%d"),
            m.cloud_cover,
            m.sun_elevation,
            m.view_angle,
            m.hemisphere
        )
        .unwrap();
    }
    out
}
