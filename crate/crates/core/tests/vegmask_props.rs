use chmkit_core::geo::DEFAULT_NODATA;
use chmkit_core::vegmask::{classify_vegetation, exb, ndi, remove_structures, VegThresholds};
use chmkit_core::{Crs, GridGeometry, Hemisphere, Raster, RgbImage};
use proptest::prelude::*;

const ND: f32 = DEFAULT_NODATA;

fn geom(cols: usize, rows: usize) -> GridGeometry {
    GridGeometry::new(0.0, 100.0, 1.0, cols, rows, Crs::utm(10, Hemisphere::North).unwrap())
        .unwrap()
}

proptest! {
    #[test]
    fn index_ranges(r in any::<u8>(), g in any::<u8>(), b in any::<u8>()) {
        let n = ndi([r, g, b]);
        let e = exb([r, g, b]);
        prop_assert!((-1.0..=1.0).contains(&n));
        prop_assert!((-1.0 - 1e-12..=1.4 + 1e-12).contains(&e));
    }

    #[test]
    fn mask_values_are_binary(
        pixels in prop::collection::vec(any::<u8>(), 48),
        ndi_min in -1.0f64..1.0,
        exb_max in -1.0f64..1.5,
    ) {
        let img = RgbImage::from_interleaved(geom(4, 4), &pixels).unwrap();
        let m = classify_vegetation(&img, &VegThresholds { ndi_min, exb_max });
        prop_assert!(m.values().iter().all(|v| *v == 0.0 || *v == 1.0));
    }

    #[test]
    fn remove_structures_never_increases_and_is_idempotent(
        chm in prop::collection::vec(prop_oneof![Just(ND), 0.0f32..50.0], 20),
        mask in prop::collection::vec(prop_oneof![Just(ND), Just(0.0f32), Just(1.0f32)], 20),
    ) {
        let g = geom(5, 4);
        let chm = Raster::new(g, ND, chm).unwrap();
        let mask = Raster::new(g, ND, mask).unwrap();
        let once = remove_structures(&chm, &mask).unwrap();
        for i in 0..20 {
            if let (Some(a), Some(b)) = (chm.valid(i), once.valid(i)) {
                prop_assert!(b <= a);
            }
        }
        prop_assert_eq!(remove_structures(&once, &mask).unwrap(), once);
    }
}
