//! Minimal LAS reader: versions 1.0 to 1.2, point data record formats 0 and
//! 1, uncompressed. Only x/y/z and the classification field are decoded.

use crate::error::{LasError, Result};
use crate::geo::Crs;
use crate::ingest::{PointCloud, PointRecord};

pub const LAS_HEADER_SIZE: usize = 227;

const OFF_VERSION_MAJOR: usize = 24;
const OFF_VERSION_MINOR: usize = 25;
const OFF_HEADER_SIZE: usize = 94;
const OFF_POINT_DATA: usize = 96;
const OFF_FORMAT: usize = 104;
const OFF_RECORD_LEN: usize = 105;
const OFF_POINT_COUNT: usize = 107;
const OFF_SCALE: usize = 131;
const OFF_OFFSET: usize = 155;

fn u16_at(b: &[u8], o: usize) -> u16 {
    u16::from_le_bytes([b[o], b[o + 1]])
}
fn u32_at(b: &[u8], o: usize) -> u32 {
    u32::from_le_bytes(b[o..o + 4].try_into().unwrap())
}
fn i32_at(b: &[u8], o: usize) -> i32 {
    i32::from_le_bytes(b[o..o + 4].try_into().unwrap())
}
fn f64_at(b: &[u8], o: usize) -> f64 {
    f64::from_le_bytes(b[o..o + 8].try_into().unwrap())
}

/// Decodes a LAS file held in memory. Coordinates are
/// `stored_int * scale + offset`. The cloud counts as classified iff at
/// least one point has a nonzero classification; otherwise every point is
/// left without a class.
pub fn read_las(bytes: &[u8], crs: Crs) -> Result<PointCloud> {
    if bytes.len() < 4 || &bytes[..4] != b"LASF" {
        return Err(LasError::BadMagic { offset: 0 }.into());
    }
    if bytes.len() < LAS_HEADER_SIZE {
        return Err(LasError::BadHeader {
            offset: bytes.len(),
            message: format!("header needs {LAS_HEADER_SIZE} bytes, file has {}", bytes.len()),
        }
        .into());
    }
    let (major, minor) = (bytes[OFF_VERSION_MAJOR], bytes[OFF_VERSION_MINOR]);
    if major != 1 || minor > 2 {
        return Err(LasError::UnsupportedVersion {
            offset: OFF_VERSION_MAJOR,
            major,
            minor,
        }
        .into());
    }
    let header_size = u16_at(bytes, OFF_HEADER_SIZE) as usize;
    if header_size < LAS_HEADER_SIZE {
        return Err(LasError::BadHeader {
            offset: OFF_HEADER_SIZE,
            message: format!("header size {header_size} < {LAS_HEADER_SIZE}"),
        }
        .into());
    }
    let format = bytes[OFF_FORMAT];
    let min_len = match format {
        0 => 20,
        1 => 28,
        _ => {
            return Err(LasError::UnsupportedFormat {
                offset: OFF_FORMAT,
                format,
            }
            .into())
        }
    };
    let record_len = u16_at(bytes, OFF_RECORD_LEN) as usize;
    if record_len < min_len {
        return Err(LasError::BadHeader {
            offset: OFF_RECORD_LEN,
            message: format!("record length {record_len} too short for format {format}"),
        }
        .into());
    }
    let data_start = u32_at(bytes, OFF_POINT_DATA) as usize;
    if data_start < header_size {
        return Err(LasError::BadHeader {
            offset: OFF_POINT_DATA,
            message: format!("point data offset {data_start} inside the header"),
        }
        .into());
    }
    if data_start > bytes.len() {
        return Err(LasError::Truncated { offset: bytes.len() }.into());
    }
    let declared = u32_at(bytes, OFF_POINT_COUNT) as u64;
    let scale = [
        f64_at(bytes, OFF_SCALE),
        f64_at(bytes, OFF_SCALE + 8),
        f64_at(bytes, OFF_SCALE + 16),
    ];
    if let Some(i) = scale.iter().position(|s| !s.is_finite() || *s == 0.0) {
        return Err(LasError::BadHeader {
            offset: OFF_SCALE + 8 * i,
            message: "scale factor must be finite and nonzero".into(),
        }
        .into());
    }
    let offset = [
        f64_at(bytes, OFF_OFFSET),
        f64_at(bytes, OFF_OFFSET + 8),
        f64_at(bytes, OFF_OFFSET + 16),
    ];
    if let Some(i) = offset.iter().position(|o| !o.is_finite()) {
        return Err(LasError::BadHeader {
            offset: OFF_OFFSET + 8 * i,
            message: "coordinate offset must be finite".into(),
        }
        .into());
    }

    let data = &bytes[data_start..];
    let whole = (data.len() / record_len) as u64;
    let partial = data.len() % record_len != 0;
    if whole < declared && partial {
        return Err(LasError::Truncated {
            offset: data_start + whole as usize * record_len,
        }
        .into());
    }
    if whole != declared || partial {
        return Err(LasError::PointCountMismatch {
            offset: OFF_POINT_COUNT,
            declared,
            found: whole,
        }
        .into());
    }

    let mut any_class = false;
    let mut points = Vec::with_capacity(declared as usize);
    for rec in data.chunks_exact(record_len) {
        let x = i32_at(rec, 0) as f64 * scale[0] + offset[0];
        let y = i32_at(rec, 4) as f64 * scale[1] + offset[1];
        let z = i32_at(rec, 8) as f64 * scale[2] + offset[2];
        let class = rec[15] & 0x1f;
        any_class |= class != 0;
        points.push(PointRecord::with_class(x, y, z, class));
    }
    if !any_class {
        for p in &mut points {
            p.classification = None;
        }
    }
    PointCloud::new(points, crs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::geo::Hemisphere;

    // Writes a LAS 1.2 format-0 file field by field.
    fn las_bytes(scale: f64, offset: f64, pts: &[(i32, i32, i32, u8)]) -> Vec<u8> {
        let mut h = vec![0u8; 227];
        h[..4].copy_from_slice(b"LASF");
        h[24] = 1;
        h[25] = 2;
        h[94..96].copy_from_slice(&227u16.to_le_bytes());
        h[96..100].copy_from_slice(&227u32.to_le_bytes());
        h[104] = 0;
        h[105..107].copy_from_slice(&20u16.to_le_bytes());
        h[107..111].copy_from_slice(&(pts.len() as u32).to_le_bytes());
        for k in 0..3 {
            h[131 + 8 * k..139 + 8 * k].copy_from_slice(&scale.to_le_bytes());
            h[155 + 8 * k..163 + 8 * k].copy_from_slice(&offset.to_le_bytes());
        }
        for &(x, y, z, c) in pts {
            let mut r = [0u8; 20];
            r[0..4].copy_from_slice(&x.to_le_bytes());
            r[4..8].copy_from_slice(&y.to_le_bytes());
            r[8..12].copy_from_slice(&z.to_le_bytes());
            r[15] = c;
            h.extend_from_slice(&r);
        }
        h
    }

    fn crs() -> Crs {
        Crs::utm(18, Hemisphere::North).unwrap()
    }

    #[test]
    fn scale_and_offset() {
        let pc = read_las(&las_bytes(0.01, 100.0, &[(2550, 0, -100, 2)]), crs()).unwrap();
        let p = pc.points()[0];
        assert_eq!(p.x, 125.5);
        assert_eq!(p.y, 100.0);
        assert_eq!(p.z, 99.0);
        assert_eq!(p.classification, Some(2));
        assert!(pc.is_classified());
    }

    #[test]
    fn classification_uses_low_five_bits_and_zero_means_unclassified() {
        let pc = read_las(&las_bytes(1.0, 0.0, &[(0, 0, 0, 0xE5), (1, 1, 1, 0)]), crs()).unwrap();
        assert_eq!(pc.points()[0].classification, Some(5));
        assert_eq!(pc.points()[1].classification, Some(0));
        let pc = read_las(&las_bytes(1.0, 0.0, &[(0, 0, 0, 0), (1, 1, 1, 0)]), crs()).unwrap();
        assert!(!pc.is_classified());
        assert!(pc.points().iter().all(|p| p.classification.is_none()));
    }

    #[test]
    fn errors_name_their_offsets() {
        let good = las_bytes(1.0, 0.0, &[(0, 0, 0, 2), (1, 1, 1, 2)]);

        let mut b = good.clone();
        b[3] = b'X';
        let err = |b: &[u8]| match read_las(b, crs()) {
            Err(Error::Las(e)) => e,
            other => panic!("expected LAS error, got {other:?}"),
        };
        assert_eq!(err(&b), LasError::BadMagic { offset: 0 });

        let mut b = good.clone();
        b[25] = 4;
        assert_eq!(err(&b).offset(), 24);

        let mut b = good.clone();
        b[104] = 3;
        assert_eq!(err(&b), LasError::UnsupportedFormat { offset: 104, format: 3 });

        let b = &good[..good.len() - 5];
        assert_eq!(err(b), LasError::Truncated { offset: 227 + 20 });

        let b = &good[..good.len() - 20];
        assert_eq!(
            err(b),
            LasError::PointCountMismatch { offset: 107, declared: 2, found: 1 }
        );

        let mut b = good.clone();
        b.extend_from_slice(&[0u8; 20]);
        assert!(matches!(err(&b), LasError::PointCountMismatch { found: 3, .. }));

        assert!(matches!(err(&good[..100]), LasError::BadHeader { .. }));
    }

    #[test]
    fn format_one_with_padding() {
        let mut b = las_bytes(0.5, 10.0, &[]);
        b[104] = 1;
        b[105..107].copy_from_slice(&30u16.to_le_bytes());
        b[107..111].copy_from_slice(&1u32.to_le_bytes());
        let mut r = [0u8; 30];
        r[0..4].copy_from_slice(&4i32.to_le_bytes());
        r[15] = 9;
        b.extend_from_slice(&r);
        let pc = read_las(&b, crs()).unwrap();
        assert_eq!(pc.points()[0].x, 12.0);
        assert_eq!(pc.points()[0].classification, Some(9));
    }
}
