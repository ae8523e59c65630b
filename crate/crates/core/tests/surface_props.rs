use chmkit_core::geo::DEFAULT_NODATA;
use chmkit_core::ingest::{PointCloud, PointRecord};
use chmkit_core::surface::{
    derive_chm, fill_gaps_spline, gap_fill_estimates, rasterize_surfaces, GapEstimate,
    NaturalSpline, SurfacePair,
};
use chmkit_core::{Crs, GridGeometry, Hemisphere, Raster};
use proptest::prelude::*;

const ND: f32 = DEFAULT_NODATA;

fn crs() -> Crs {
    Crs::utm(33, Hemisphere::North).unwrap()
}

fn geom(cols: usize, rows: usize) -> GridGeometry {
    GridGeometry::new(400_000.0, 5_000_000.0, 3.0, cols, rows, crs()).unwrap()
}

/// Natural cubic spline through (xs, ys) evaluated at `x`, by solving the full
/// piecewise-cubic coefficient system with dense Gaussian elimination.
fn dense_spline_oracle(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let seg = xs.len() - 1;
    let n = 4 * seg;
    let mut a = vec![vec![0.0; n + 1]; n];
    let mut row = 0;
    let basis = |t: f64| [1.0, t, t * t, t * t * t];
    let d1 = |t: f64| [0.0, 1.0, 2.0 * t, 3.0 * t * t];
    let d2 = |t: f64| [0.0, 0.0, 2.0, 6.0 * t];
    for s in 0..seg {
        let h = xs[s + 1] - xs[s];
        for (k, b) in basis(0.0).iter().enumerate() {
            a[row][4 * s + k] = *b;
        }
        a[row][n] = ys[s];
        row += 1;
        for (k, b) in basis(h).iter().enumerate() {
            a[row][4 * s + k] = *b;
        }
        a[row][n] = ys[s + 1];
        row += 1;
        if s + 1 < seg {
            for (k, (p, q)) in d1(h).iter().zip(d1(0.0)).enumerate() {
                a[row][4 * s + k] = *p;
                a[row][4 * (s + 1) + k] = -q;
            }
            row += 1;
            for (k, (p, q)) in d2(h).iter().zip(d2(0.0)).enumerate() {
                a[row][4 * s + k] = *p;
                a[row][4 * (s + 1) + k] = -q;
            }
            row += 1;
        }
    }
    for (k, b) in d2(0.0).iter().enumerate() {
        a[row][k] = *b;
    }
    row += 1;
    let hl = xs[seg] - xs[seg - 1];
    for (k, b) in d2(hl).iter().enumerate() {
        a[row][4 * (seg - 1) + k] = *b;
    }
    row += 1;
    assert_eq!(row, n);
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                if f != 0.0 {
                    for k in c..=n {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
    }
    let coef: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
    let s = (0..seg).find(|&s| x <= xs[s + 1]).unwrap_or(seg - 1);
    let t = x - xs[s];
    (0..4).map(|k| coef[4 * s + k] * t.powi(k as i32)).sum()
}

#[test]
fn quadratic_field_gap_matches_dense_oracle() {
    let (cols, rows) = (7, 6);
    let f = |c: usize, r: usize| {
        let (x, y) = (c as f64, r as f64);
        0.3 * x * x - 0.2 * x * y + 0.15 * y * y + x - 2.0
    };
    let mut v: Vec<f32> = (0..rows).flat_map(|r| (0..cols).map(move |c| f(c, r) as f32)).collect();
    let (gc, gr) = (3, 2);
    v[gr * cols + gc] = ND;
    let r = Raster::new(geom(cols, rows), ND, v.clone()).unwrap();

    let row_knots: Vec<usize> = (0..cols).filter(|&c| c != gc).collect();
    let col_knots: Vec<usize> = (0..rows).filter(|&q| q != gr).collect();
    let val = |c: usize, q: usize| v[q * cols + c] as f64;
    let row_est = dense_spline_oracle(
        &row_knots.iter().map(|&c| c as f64).collect::<Vec<_>>(),
        &row_knots.iter().map(|&c| val(c, gr)).collect::<Vec<_>>(),
        gc as f64,
    );
    let col_est = dense_spline_oracle(
        &col_knots.iter().map(|&q| q as f64).collect::<Vec<_>>(),
        &col_knots.iter().map(|&q| val(gc, q)).collect::<Vec<_>>(),
        gr as f64,
    );
    let expected = 0.5 * (row_est + col_est);

    let est = gap_fill_estimates(&r).unwrap();
    assert_eq!(est.len(), 1);
    let GapEstimate::Spline(got) = est[0].1 else {
        panic!("interior gap not spline-filled");
    };
    assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    let filled = fill_gaps_spline(&r).unwrap();
    assert_eq!(filled.get(gc, gr), got as f32);
}

proptest! {
    #[test]
    fn spline_matches_dense_oracle(
        steps in prop::collection::vec(0.5f64..3.0, 2..9),
        ys in prop::collection::vec(-50.0f64..50.0, 10),
        probe in 0.0f64..1.0,
    ) {
        let mut xs = vec![0.0];
        for s in &steps {
            xs.push(xs.last().unwrap() + s);
        }
        let ys = &ys[..xs.len()];
        let spline = NaturalSpline::fit(&xs, ys).unwrap();
        let x = probe * xs.last().unwrap();
        let expected = dense_spline_oracle(&xs, ys, x);
        prop_assert!((spline.eval(x) - expected).abs() < 1e-9 * (1.0 + expected.abs()));
    }

    #[test]
    fn ramp_gaps_are_exact_and_valid_cells_untouched(
        cols in 3usize..12,
        rows in 3usize..12,
        a in -12i32..12,
        b in -12i32..12,
        c in -400i32..400,
        holes in prop::collection::vec(any::<bool>(), 144),
    ) {
        // Quarter-step coefficients keep every knot exact in f32.
        let (a, b, c) = (a as f64 / 4.0, b as f64 / 4.0, c as f64 / 4.0);
        let truth: Vec<f64> = (0..rows * cols)
            .map(|i| a * (i % cols) as f64 + b * (i / cols) as f64 + c)
            .collect();
        // Holes only in the interior, so every gap lies between valid cells.
        let v: Vec<f32> = (0..rows * cols)
            .map(|i| {
                let (col, row) = (i % cols, i / cols);
                let interior = col > 0 && row > 0 && col + 1 < cols && row + 1 < rows;
                if interior && holes[i] { ND } else { truth[i] as f32 }
            })
            .collect();
        let r = Raster::new(geom(cols, rows), ND, v.clone()).unwrap();
        let f = fill_gaps_spline(&r).unwrap();
        for (i, est) in gap_fill_estimates(&r).unwrap() {
            let GapEstimate::Spline(e) = est else {
                return Err(TestCaseError::fail("interior gap not spline-filled"));
            };
            prop_assert!((e - truth[i]).abs() < 1e-6, "cell {}: {} vs {}", i, e, truth[i]);
            prop_assert_eq!(f.values()[i], e as f32);
        }
        for i in 0..v.len() {
            if v[i] != ND {
                prop_assert_eq!(f.values()[i].to_bits(), v[i].to_bits());
            }
        }
    }

    #[test]
    fn dsm_values_are_attained_and_chm_nonnegative(
        pts in prop::collection::vec((0.0f64..12.0, 0.0f64..12.0, -5.0f64..40.0), 1..200),
    ) {
        let g = GridGeometry::new(0.0, 12.0, 3.0, 4, 4, crs()).unwrap();
        let pc = PointCloud::new(
            pts.iter().map(|&(x, y, z)| PointRecord::new(x, y, z)).collect(),
            crs(),
        ).unwrap();
        let pair = rasterize_surfaces(&pc, &pc, &g).unwrap();
        for (i, v) in pair.dsm.values().iter().enumerate() {
            if *v != -1.0 {
                let attained = pts.iter().any(|&(x, y, z)| {
                    g.locate(x, y).map(|(c, r)| g.index(c, r)) == Some(i) && z as f32 == *v
                });
                prop_assert!(attained, "cell {} value {} not attained", i, v);
            }
        }
        prop_assert_eq!(pair.dem.valid_count(), 16);
        let chm = derive_chm(&pair).unwrap();
        prop_assert!(chm.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn derive_chm_nonnegative(
        dsm in prop::collection::vec(-1.0f32..60.0, 16),
        dem in prop::collection::vec(-20.0f32..60.0, 16),
    ) {
        let g = geom(4, 4);
        let pair = SurfacePair {
            dsm: Raster::new(g, ND, dsm).unwrap(),
            dem: Raster::new(g, ND, dem).unwrap(),
        };
        let chm = derive_chm(&pair).unwrap();
        prop_assert!(chm.values().iter().all(|v| *v >= 0.0));
    }
}
