use chmkit_core::ground_filter::{csf_classify, simulate_cloth, split_by_class, CsfParams};
use chmkit_core::ingest::{PointCloud, PointRecord};
use chmkit_core::{Crs, Hemisphere};
use proptest::prelude::*;

fn crs() -> Crs {
    Crs::utm(32, Hemisphere::North).unwrap()
}

// With the default parameters the cloth falls at most
// max_iterations * gravity_displacement (about 42 m), start offset included.
const MAX_RELIEF: f64 = 20.0;

fn relief(size: usize, slope_deg: f64, azimuth_deg: f64) -> f64 {
    let (s, c) = azimuth_deg.to_radians().sin_cos();
    slope_deg.to_radians().tan() * (s.abs() + c.abs()) * (size - 1) as f64
}

fn plane(size: usize, slope_deg: f64, azimuth_deg: f64, x0: f64, y0: f64) -> PointCloud {
    let t = slope_deg.to_radians().tan();
    let (s, c) = azimuth_deg.to_radians().sin_cos();
    let pts = (0..size * size)
        .map(|k| {
            let (x, y) = ((k % size) as f64, (k / size) as f64);
            PointRecord::new(x0 + x, y0 + y, 200.0 + t * (c * x + s * y))
        })
        .collect();
    PointCloud::new(pts, crs()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn planes_up_to_30_degrees_are_all_ground(
        slope in 0.0f64..=30.0,
        azimuth in 0.0f64..360.0,
        size in 10usize..=40,
        x0 in 300_000.0f64..700_000.0,
        y0 in 4_000_000.0f64..6_000_000.0,
    ) {
        prop_assume!(relief(size, slope, azimuth) <= MAX_RELIEF);
        let pc = plane(size, slope, azimuth, x0.floor(), y0.floor());
        let labels = csf_classify(&pc, &CsfParams::default()).unwrap();
        prop_assert_eq!(labels.ground_count(), pc.len());
    }

    #[test]
    fn threshold_monotone_and_partition(
        seed_pts in prop::collection::vec((0.0f64..25.0, 0.0f64..25.0, 0.0f64..8.0), 50..300),
        thresholds in prop::collection::vec(0.05f64..5.0, 2..6),
    ) {
        let pts = seed_pts.iter().map(|&(x, y, z)| PointRecord::new(x, y, z)).collect();
        let pc = PointCloud::new(pts, crs()).unwrap();
        let cloth = simulate_cloth(&pc, &CsfParams::default()).unwrap();
        let mut ts = thresholds.clone();
        ts.sort_by(f64::total_cmp);
        let mut prev: Option<Vec<bool>> = None;
        for t in ts {
            let labels = cloth.classify(&pc, t);
            prop_assert_eq!(labels.len(), pc.len());
            let g = labels.ground_count();
            prop_assert_eq!(g + labels.non_ground().iter().filter(|b| **b).count(), pc.len());
            if let Some(p) = &prev {
                prop_assert!(p.iter().zip(labels.as_slice()).all(|(a, b)| !*a || *b));
            }
            prev = Some(labels.as_slice().to_vec());
        }
    }

    #[test]
    fn split_partitions_exactly(codes in prop::collection::vec(0u8..32, 1..200)) {
        let pts = codes
            .iter()
            .enumerate()
            .map(|(i, c)| PointRecord::with_class(i as f64, 0.0, 0.0, *c))
            .collect();
        let pc = PointCloud::new(pts, crs()).unwrap();
        let s = split_by_class(&pc).unwrap();
        prop_assert_eq!(s.ground.len() + s.vegetation.len() + s.excluded.len(), codes.len());
        prop_assert!(s.ground.points().iter().all(|p| p.classification == Some(2)));
        prop_assert!(s
            .vegetation
            .points()
            .iter()
            .all(|p| matches!(p.classification, Some(3..=5))));
    }
}
