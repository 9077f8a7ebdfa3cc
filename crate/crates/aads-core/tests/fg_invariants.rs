//! Fefferman-Graham tables against the exact AdS closure metric and the
//! Einstein equations of the rebuilt bulk.

use aads_core::fefferman_graham::{fg_expand, reference_point, BoundaryData, FGCoefficientTable};
use aads_core::linalg;
use aads_core::spacetimes::{build_model, Family, ModelSpec};
use aads_core::tensor_core::einstein_residual;

/// Taylor coefficients in z of the boundary block of the ads_closure closure metric,
/// by exact polynomial interpolation (the block is a quartic in z).
fn closure_taylor(d: usize) -> Vec<Vec<f64>> {
    let m = build_model(&ModelSpec::new(Family::AdsClosure, d, 1.0)).unwrap().closure().unwrap();
    let n = d - 1;
    let zs = [0.1, 0.2, 0.3, 0.4, 0.5];
    let block = |z: f64| {
        let mut x = reference_point(d);
        x.insert(1, z);
        let g = m.source.metric_f64(&x);
        let idx: Vec<usize> = (0..d).filter(|&i| i != 1).collect();
        let mut out = vec![0.0; n * n];
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                out[a * n + b] = g[ia * d + ib];
            }
        }
        out
    };
    let samples: Vec<Vec<f64>> = zs.iter().map(|&z| block(z)).collect();
    let mut v = vec![0.0; 25];
    for (i, z) in zs.iter().enumerate() {
        for k in 0..5 {
            v[i * 5 + k] = z.powi(k as i32);
        }
    }
    let mut coeffs = vec![vec![0.0; n * n]; 5];
    for e in 0..n * n {
        let rhs: Vec<f64> = samples.iter().map(|s| s[e]).collect();
        let c = linalg::solve(&v, &rhs, 5).unwrap();
        for k in 0..5 {
            coeffs[k][e] = c[k];
        }
    }
    coeffs
}

fn esu_with_zero_electric(d: usize) -> BoundaryData {
    let n = d - 1;
    BoundaryData::analytic_esu(d).unwrap().with_electric(vec![vec![0.0; n * n]]).unwrap()
}

#[test]
fn esu_tables_match_the_exact_closure_metric() {
    for d in [4, 5, 6] {
        let want = closure_taylor(d);
        let t = fg_expand(&BoundaryData::analytic_esu(d).unwrap(), d - 2).unwrap();
        let full = fg_expand(&esu_with_zero_electric(d), 6).unwrap();
        for table in [&t, &full] {
            for j in 0..=table.order {
                let got = table.coefficient(j).unwrap().grid[0].as_ref().unwrap();
                let w = want.get(j).cloned().unwrap_or_else(|| vec![0.0; got.len()]);
                for (a, b) in got.iter().zip(&w) {
                    assert!((a - b).abs() < 1e-8, "d={d} j={j}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn odd_coefficients_vanish_below_the_electric_order() {
    for d in [4, 5, 6, 7] {
        let t = fg_expand(&BoundaryData::analytic_esu(d).unwrap(), d - 2).unwrap();
        assert!(t.odd_max < 1e-10, "d={d}: {}", t.odd_max);
        let t = fg_expand(&BoundaryData::analytic_minkowski(d).unwrap(), d - 2).unwrap();
        assert!(t.odd_max < 1e-10);
    }
}

fn rebuilt_residuals(t: FGCoefficientTable) -> (f64, f64) {
    let d = t.d;
    let m = build_model(&ModelSpec { table: Some(t), ..ModelSpec::new(Family::FgMetric, d, 1.0) }).unwrap();
    let lam = -(((d - 1) * (d - 2)) as f64) / 2.0;
    let at = |z: f64| {
        let mut x = reference_point(d);
        x.insert(1, z);
        einstein_residual(&m, &m.point(&x), lam).unwrap()
    };
    (at(0.1), at(0.05))
}

#[test]
fn rebuilt_bulk_residual_follows_the_truncation_order() {
    for d in [4usize, 5] {
        let n = d - 1;
        let mut e = vec![0.0; n * n];
        e[0] = 0.1 * (n as f64 - 1.0);
        for a in 1..n {
            e[a * n + a] = 0.1;
        }
        let data = BoundaryData::analytic_esu(d).unwrap().with_electric(vec![e]).unwrap();
        for order in [d, d + 1, d + 2, 2 * n, 2 * n + 1] {
            let t = fg_expand(&data, order).unwrap();
            assert_eq!(t.order, order);
            let (r1, r2) = rebuilt_residuals(t);
            let slope = (r1 / r2).log2();
            assert!(slope > order as f64 - 1.2, "d={d} order={order}: residuals {r1:.3e} {r2:.3e}, slope {slope:.2}");
        }
    }
}

#[test]
fn tables_past_twice_the_boundary_dimension_stay_finite() {
    let t = fg_expand(&esu_with_zero_electric(4), 9).unwrap();
    assert_eq!(t.order, 9);
    for c in &t.coefficients {
        assert!(c.grid[0].as_ref().unwrap().iter().all(|v| v.is_finite()), "h_{}", c.j);
    }
}
