//! Wedge flows, complements and modular time functions.

use aads_core::modular_geometry::ModularFrame;
use aads_core::regions::{
    causal_complement, chronological_relation, diamond_complement, rehren_map, wedge_flow, CausalMode, Point, WedgeSpec,
};
use aads_core::spacetimes::{build_model, BoundaryPoint, Chronology, Family, ModelSpec};
use aads_core::tensor_core::{ChartPoint, SpacetimeModel};
use proptest::prelude::*;

fn model(spec: ModelSpec) -> SpacetimeModel {
    build_model(&spec).unwrap()
}

fn cartesian() -> SpacetimeModel {
    model(ModelSpec::new(Family::AdsGlobal, 4, 1.0).with_chart("global_cartesian"))
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.iter().map(|c| c / n).collect()
}

fn wedge() -> WedgeSpec {
    WedgeSpec::new(BoundaryPoint::new(-1.2, &[1.0, 0.0, 0.0]).unwrap(), BoundaryPoint::new(1.3, &[0.96, 0.28, 0.0]).unwrap()).unwrap()
}

fn inside(m: &SpacetimeModel, w: &WedgeSpec, x: &Point) -> bool {
    let a = chronological_relation(m, &Point::Boundary(w.p.clone()), x, CausalMode::Exact).unwrap();
    let b = chronological_relation(m, x, &Point::Boundary(w.q.clone()), CausalMode::Exact).unwrap();
    a == Chronology::ChronologicalFuture && b == Chronology::ChronologicalFuture
}

fn bulk(p: Point) -> ChartPoint {
    match p {
        Point::Bulk(c) => c,
        Point::Boundary(_) => panic!("expected a bulk point"),
    }
}

fn flat_frame(d: usize) -> ModularFrame {
    let m = model(ModelSpec::new(Family::Minkowski, d, 1.0));
    let mut p = vec![0.0; d];
    let mut q = vec![0.0; d];
    p[0] = -1.0;
    q[0] = 1.0;
    ModularFrame::new(&m, m.point(&p), m.point(&q)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wedge_flow_group_law_and_invariance(
        t in -0.3..0.3f64,
        rho in 0.5..5.0f64,
        off in prop::collection::vec(-0.5..0.5f64, 2),
        l1 in -5.0..5.0f64,
        l2 in -2.5..2.5f64,
    ) {
        let m = cartesian();
        let w = wedge();
        let n = unit(&[1.0, off[0], off[1]]);
        let x = Point::Bulk(m.point(&[t, rho * n[0], rho * n[1], rho * n[2]]));
        prop_assume!(inside(&m, &w, &x));
        let a = wedge_flow(&m, &w, &x, l1).unwrap();
        prop_assert!(inside(&m, &w, &a), "{a:?} left the wedge");
        let ab = bulk(wedge_flow(&m, &w, &a, l2).unwrap());
        let direct = bulk(wedge_flow(&m, &w, &x, l1 + l2).unwrap());
        for (u, v) in ab.coords.iter().zip(&direct.coords) {
            prop_assert!((u - v).abs() < 1e-9 * (1.0 + v.abs()), "{:?} vs {:?}", ab.coords, direct.coords);
        }
    }

    #[test]
    fn boundary_flow_preserves_chronology(
        a in (-0.4..0.4f64, prop::collection::vec(-0.4..0.4f64, 3)),
        b in (-0.4..0.4f64, prop::collection::vec(-0.4..0.4f64, 3)),
        l in -3.0..3.0f64,
    ) {
        let m = cartesian();
        let w = wedge();
        let mk = |(t, e): &(f64, Vec<f64>)| BoundaryPoint::new(*t, &unit(&[1.0 + e[0], e[1], e[2]])).map(Point::Boundary);
        let (Ok(pa), Ok(pb)) = (mk(&a), mk(&b)) else { return Ok(()) };
        prop_assume!(inside(&m, &w, &pa) && inside(&m, &w, &pb));
        let before = chronological_relation(&m, &pa, &pb, CausalMode::Exact).unwrap();
        prop_assume!(before != Chronology::Lightlike);
        let fa = wedge_flow(&m, &w, &pa, l).unwrap();
        let fb = wedge_flow(&m, &w, &pb, l).unwrap();
        prop_assert_eq!(chronological_relation(&m, &fa, &fb, CausalMode::Exact).unwrap(), before);
    }

    #[test]
    fn rehren_map_commutes_with_complements(
        tp in -2.0..2.0f64, dt in 0.3..2.5f64,
        ep in prop::collection::vec(-1.0..1.0f64, 3), eq in prop::collection::vec(-1.0..1.0f64, 3),
    ) {
        let m = model(ModelSpec::new(Family::AdsGlobal, 4, 1.0));
        let p = BoundaryPoint::new(tp, &unit(&ep)).unwrap();
        let q = BoundaryPoint::new(tp + dt, &unit(&eq)).unwrap();
        let Ok(w) = WedgeSpec::new(p, q) else { return Ok(()) };
        let via_bulk = rehren_map(&causal_complement(&w, &m).unwrap()).unwrap();
        let via_boundary = diamond_complement(&rehren_map(&w).unwrap()).unwrap();
        prop_assert_eq!(via_bulk, via_boundary);
    }

    #[test]
    fn flat_time_function_increases_along_causal_curves(
        x in prop::collection::vec(-0.5..0.5f64, 3),
        dir in prop::collection::vec(-1.0..1.0f64, 2),
        speed in 0.0..1.0f64,
    ) {
        let f = flat_frame(3);
        // future-directed causal direction (1, speed·n̂)
        let n = unit(&[dir[0] + 1e-9, dir[1]]);
        let v = [1.0, speed * n[0], speed * n[1]];
        let mut last = f64::NEG_INFINITY;
        let mut seen = 0;
        for k in 0..20 {
            let s = -1.0 + 0.1 * k as f64;
            let r = f.model.point(&[x[0] + s * v[0], x[1] + s * v[1], x[2] + s * v[2]]);
            let Ok(l) = f.time_function(&r) else { continue };
            if seen > 0 {
                prop_assert!(l > last, "{l} after {last}");
            }
            last = l;
            seen += 1;
        }
    }

    #[test]
    fn flat_time_function_matches_world_functions(x in prop::collection::vec(-0.6..0.6f64, 4)) {
        let f = flat_frame(4);
        let r = f.model.point(&x);
        let Ok(closed) = f.time_function(&r) else { return Ok(()) };
        prop_assert!((closed - f.time_function_gamma(&r).unwrap()).abs() < 1e-6);
    }
}

#[test]
fn flat_flow_approaches_a_scaling_at_the_tip() {
    let f = flat_frame(3);
    let q = [1.0, 0.0, 0.0];
    for x in [[0.1, 0.2, -0.1], [-0.3, 0.1, 0.4], [0.5, -0.2, 0.1]] {
        let r = f.model.point(&x);
        let ratio = |l: f64| {
            let y = f.flow(&r, l).unwrap().coords;
            let s = (-l).exp();
            (0..3).map(|i| (y[i] - (q[i] + s * (x[i] - q[i]))).powi(2)).sum::<f64>().sqrt() / s
        };
        let (a, b) = (ratio(5.0), ratio(8.0));
        assert!(b.is_finite() && (a - b).abs() < 0.05 * (1.0 + b), "{x:?}: {a} vs {b}");
    }
}

#[test]
fn ads_time_function_increases_along_a_timelike_curve() {
    let m = cartesian();
    let f = ModularFrame::new(&m, m.point(&[-1.0, 0.2, 0.0, 0.1]), m.point(&[1.0, 0.2, 0.0, 0.1])).unwrap();
    let mut last = f64::NEG_INFINITY;
    for k in 1..8 {
        let s = -0.75 + 0.2 * k as f64;
        let l = f.time_function(&m.point(&[s, 0.2 + 0.3 * s, 0.1 * s, 0.1])).unwrap();
        assert!(l > last, "{l} after {last}");
        last = l;
    }
}
