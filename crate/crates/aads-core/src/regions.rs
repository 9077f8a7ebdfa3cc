//! Wedges, diamonds and causal predicates.
//!
//! Exact predicates for AdS use the conformal picture: AdS_d is the half of
//! ESU_d with `n ∈ S^{d−1}`, `n_last ≥ 0`, and two events are chronologically
//! related iff `|Δt|` exceeds the great-circle distance of their `n`. Boundary
//! points sit on the equator `n = (e, 0)`.
//!
//! The wedge flow is the one-parameter boost of ℝ^{2,d−1} that fixes the null
//! rays of `p` and `q`, rescaling them by `e^{∓λ}`.

use crate::error::{AadsError, Result};
use crate::geodesic::{self, GeodesicState, StopRule};
use crate::linalg;
use crate::spacetimes::{
    antipodal, boundary_chronology, esu_to_minkowski, minkowski_to_esu, sphere_distance, sphere_embed, transition,
    BoundaryPoint, Chronology,
};
use crate::tensor_core::{ChartPoint, SpacetimeModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A pair of boundary points `p ≪ q` labelling a bulk wedge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeSpec {
    pub p: BoundaryPoint,
    pub q: BoundaryPoint,
}

/// A pair of boundary points `p ≪ q` labelling a boundary diamond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiamondSpec {
    pub p: BoundaryPoint,
    pub q: BoundaryPoint,
}

/// Checks `p ≪ q` and that the diamond fits in one Minkowski domain, i.e.
/// `q ≪ (τ_p + 2π, e_p)`.
pub fn validate_pair(p: &BoundaryPoint, q: &BoundaryPoint) -> Result<()> {
    if p.e.len() != q.e.len() {
        return Err(AadsError::Precondition("p and q live on different boundaries".into()));
    }
    if boundary_chronology(p, q) != Chronology::ChronologicalFuture {
        return Err(AadsError::Precondition(format!(
            "q = (τ {}, e {:?}) is not in the chronological future of p = (τ {}, e {:?})",
            q.tau, q.e, p.tau, p.e
        )));
    }
    let dt = q.tau - p.tau;
    let dist = sphere_distance(&p.e, &q.e);
    if dt + dist >= 2.0 * PI {
        return Err(AadsError::Precondition(format!(
            "Δτ + distance = {:.6} ≥ 2π: the diamond is not contained in a single Minkowski domain",
            dt + dist
        )));
    }
    Ok(())
}

impl WedgeSpec {
    pub fn new(p: BoundaryPoint, q: BoundaryPoint) -> Result<Self> {
        validate_pair(&p, &q)?;
        Ok(WedgeSpec { p, q })
    }
}

impl DiamondSpec {
    pub fn new(p: BoundaryPoint, q: BoundaryPoint) -> Result<Self> {
        validate_pair(&p, &q)?;
        Ok(DiamondSpec { p, q })
    }
}

pub fn rehren_map(w: &WedgeSpec) -> Result<DiamondSpec> {
    DiamondSpec::new(w.p.clone(), w.q.clone())
}

pub fn rehren_inverse(d: &DiamondSpec) -> Result<WedgeSpec> {
    WedgeSpec::new(d.p.clone(), d.q.clone())
}

/// Inverse of the antipodal map: `(τ − π, −e)`.
pub fn antipodal_inverse(p: &BoundaryPoint) -> BoundaryPoint {
    BoundaryPoint { tau: p.tau - PI, e: p.e.iter().map(|v| -v).collect() }
}

/// Causal complement of `W_{p, q̄}` in AdS: `W_{q, p̄}`, where `q̄` is the second label.
pub fn causal_complement(w: &WedgeSpec, model: &SpacetimeModel) -> Result<WedgeSpec> {
    if model.label != "ads" {
        return Err(AadsError::Unsupported(format!(
            "exact wedge complements need pure AdS, got {}; use the numeric overlap volume instead",
            model.label
        )));
    }
    WedgeSpec::new(antipodal_inverse(&w.q), antipodal(&w.p))
}

/// Boundary causal complement of `D_{p, q̄}`: `D_{q, p̄}`.
pub fn diamond_complement(d: &DiamondSpec) -> Result<DiamondSpec> {
    DiamondSpec::new(antipodal_inverse(&d.q), antipodal(&d.p))
}

/// A bulk chart point or a boundary point.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Bulk(ChartPoint),
    Boundary(BoundaryPoint),
}

/// Time and position on the sphere of the conformal compactification.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalEvent {
    pub t: f64,
    pub n: Vec<f64>,
}

/// Conformal event of an AdS bulk point (any AdS chart).
pub fn ads_conformal_event(p: &ChartPoint, r: f64) -> Result<ConformalEvent> {
    let c = transition(p, "ads_global_cartesian", r)?;
    let x = &c.coords[1..];
    let a = (r * r + x.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let mut n: Vec<f64> = x.iter().map(|v| v / a).collect();
    n.push(r / a);
    Ok(ConformalEvent { t: c.coords[0], n })
}

fn boundary_event(b: &BoundaryPoint, with_pole: bool) -> ConformalEvent {
    let mut n = b.e.clone();
    if with_pole {
        n.push(0.0);
    }
    ConformalEvent { t: b.tau, n }
}

fn classify(dt: f64, dist: f64) -> Chronology {
    let tol = 1e-12 * (1.0 + dt.abs());
    if (dt.abs() - dist).abs() <= tol {
        Chronology::Lightlike
    } else if dt > dist {
        Chronology::ChronologicalFuture
    } else if dt < -dist {
        Chronology::ChronologicalPast
    } else {
        Chronology::Spacelike
    }
}

/// How AAdS predicates are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CausalMode {
    Exact,
    /// Light-cone arrival tables from null fans with `n_fan` launch angles.
    Numeric { n_fan: usize },
}

/// Conformal event for exact mode, or `None` if the model has no exact predicate.
fn exact_event(model: &SpacetimeModel, p: &Point) -> Result<ConformalEvent> {
    match (model.label.as_str(), p) {
        ("ads", Point::Bulk(c)) => ads_conformal_event(c, model.ads_radius),
        ("ads", Point::Boundary(b)) => {
            if b.e.len() != model.d - 1 {
                return Err(AadsError::Domain(format!("boundary point has {} components, expected {}", b.e.len(), model.d - 1)));
            }
            Ok(boundary_event(b, true))
        }
        ("esu", Point::Bulk(c)) => Ok(ConformalEvent { t: c.coords[0], n: sphere_embed(&c.coords[1..]) }),
        ("esu", Point::Boundary(b)) => Ok(boundary_event(b, false)),
        ("minkowski", Point::Bulk(c)) => Ok(boundary_event(&minkowski_to_esu(&c.coords)?, false)),
        ("minkowski", Point::Boundary(b)) => Ok(boundary_event(b, false)),
        (other, _) => Err(AadsError::Unsupported(format!(
            "no exact causal predicate for {other}; request numeric mode"
        ))),
    }
}

/// Chronological relation of `b` relative to `a`.
pub fn chronological_relation(model: &SpacetimeModel, a: &Point, b: &Point, mode: CausalMode) -> Result<Chronology> {
    match mode {
        CausalMode::Exact => {
            if let ("minkowski", Point::Bulk(x), Point::Bulk(y)) = (model.label.as_str(), a, b) {
                let dx: Vec<f64> = y.coords.iter().zip(&x.coords).map(|(u, v)| u - v).collect();
                let dist = linalg::norm(&dx[1..]);
                return Ok(classify(dx[0], dist));
            }
            let ea = exact_event(model, a)?;
            let eb = exact_event(model, b)?;
            Ok(classify(eb.t - ea.t, sphere_distance(&ea.n, &eb.n)))
        }
        CausalMode::Numeric { n_fan } => {
            let (bulk, bdy, flip) = match (a, b) {
                (Point::Bulk(x), Point::Boundary(y)) => (x, y, false),
                (Point::Boundary(y), Point::Bulk(x)) => (x, y, true),
                _ => {
                    return Err(AadsError::Unsupported(
                        "numeric mode relates a bulk point to a boundary point".into(),
                    ))
                }
            };
            let fan = ArrivalFan::build(model, bulk, n_fan)?;
            let psi = fan.angle_to(&bdy.e);
            let f = fan.arrival(psi)?;
            let dt = bdy.tau - fan.t0;
            // dt measured from the bulk point; the light cone reaches the generator after f
            let rel = if (dt.abs() - f).abs() <= fan.certificate.max(1e-12) {
                return Err(AadsError::Indeterminate(format!(
                    "|Δτ| − arrival = {:.3e} is below the fan resolution {:.3e}",
                    dt.abs() - f,
                    fan.certificate
                )));
            } else if dt > f {
                Chronology::ChronologicalFuture
            } else if dt < -f {
                Chronology::ChronologicalPast
            } else {
                Chronology::Spacelike
            };
            Ok(if flip {
                match rel {
                    Chronology::ChronologicalFuture => Chronology::ChronologicalPast,
                    Chronology::ChronologicalPast => Chronology::ChronologicalFuture,
                    r => r,
                }
            } else {
                rel
            })
        }
    }
}

/// Null vector in ℝ^{2,k} (k = d − 1 for AdS_d) or a bulk embedding vector.
fn embedding_vector(model: &SpacetimeModel, x: &Point) -> Result<(Vec<f64>, bool)> {
    match (model.label.as_str(), x) {
        ("ads", Point::Bulk(c)) => {
            let ev = ads_conformal_event(c, model.ads_radius)?;
            Ok((embed_event(&ev), true))
        }
        (_, Point::Boundary(b)) => Ok((embed_null(b), false)),
        ("minkowski", Point::Bulk(c)) => Ok((embed_null(&minkowski_to_esu(&c.coords)?), false)),
        ("esu", Point::Bulk(c)) => Ok((embed_null(&BoundaryPoint::new(c.coords[0], &sphere_embed(&c.coords[1..]))?), false)),
        (other, _) => Err(AadsError::Unsupported(format!("wedge flow is only defined in closed form for AdS, got {other}"))),
    }
}

/// (sin τ, e, cos τ).
fn embed_null(b: &BoundaryPoint) -> Vec<f64> {
    let mut v = vec![b.tau.sin()];
    v.extend_from_slice(&b.e);
    v.push(b.tau.cos());
    v
}

/// Bulk point from its conformal event, scaled so that ⟨X, X⟩ = −1.
fn embed_event(ev: &ConformalEvent) -> Vec<f64> {
    let k = ev.n.len() - 1;
    let c = ev.n[k];
    let mut v = vec![ev.t.sin() / c];
    v.extend(ev.n[..k].iter().map(|x| x / c));
    v.push(ev.t.cos() / c);
    v
}

fn minkowski_ip(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    -a[0] * b[0] - a[n - 1] * b[n - 1] + (1..n - 1).map(|i| a[i] * b[i]).sum::<f64>()
}

fn lift(t0: f64, mid: f64) -> f64 {
    t0 + 2.0 * PI * ((mid - t0) / (2.0 * PI)).round()
}

fn in_region(model: &SpacetimeModel, p: &BoundaryPoint, q: &BoundaryPoint, x: &Point) -> Result<bool> {
    let bp = Point::Boundary(p.clone());
    let bq = Point::Boundary(q.clone());
    let a = chronological_relation(model, &bp, x, CausalMode::Exact)?;
    let b = chronological_relation(model, x, &bq, CausalMode::Exact)?;
    Ok(a == Chronology::ChronologicalFuture && b == Chronology::ChronologicalFuture)
}

/// Modular flow `u^λ_{p,q}` of the wedge (bulk points) or diamond (boundary
/// points, Minkowski or ESU chart points).
pub fn wedge_flow(model: &SpacetimeModel, w: &WedgeSpec, x: &Point, lambda: f64) -> Result<Point> {
    validate_pair(&w.p, &w.q)?;
    if !in_region(model, &w.p, &w.q, x)? {
        return Err(AadsError::Domain("point is not inside the wedge or diamond".into()));
    }
    let (xv, bulk) = embedding_vector(model, x)?;
    let pv = embed_null(&w.p);
    let qv = embed_null(&w.q);
    let pq = minkowski_ip(&pv, &qv);
    let a = minkowski_ip(&xv, &qv) / pq;
    let b = minkowski_ip(&xv, &pv) / pq;
    let (ea, eb) = ((-lambda).exp(), lambda.exp());
    let y: Vec<f64> = (0..xv.len()).map(|i| xv[i] + a * (ea - 1.0) * pv[i] + b * (eb - 1.0) * qv[i]).collect();
    let mid = 0.5 * (w.p.tau + w.q.tau);
    let k = y.len() - 1;
    let t = lift(y[0].atan2(y[k]), mid);
    if bulk {
        let r = model.ads_radius;
        let c = (y[0] * y[0] + y[k] * y[k]).sqrt();
        // X = (√(1+ρ²/R²)(sin t, cos t), x⃗/R) up to the overall scale fixed by ⟨X,X⟩ = −1
        let s = 1.0 / (c * c - y[1..k].iter().map(|v| v * v).sum::<f64>()).sqrt();
        let mut coords = vec![t];
        coords.extend(y[1..k].iter().map(|v| v * s * r));
        let hub = ChartPoint::new("ads_global_cartesian", &coords);
        let Point::Bulk(orig) = x else { unreachable!() };
        Ok(Point::Bulk(transition(&hub, &orig.chart_id, r)?))
    } else {
        let e: Vec<f64> = y[1..k].to_vec();
        let n = linalg::norm(&e);
        let bp = BoundaryPoint::new(t, &e.iter().map(|v| v / n).collect::<Vec<_>>())?;
        match x {
            Point::Boundary(_) => Ok(Point::Boundary(bp)),
            Point::Bulk(c) if model.label == "minkowski" => Ok(Point::Bulk(ChartPoint::new(&c.chart_id, &esu_to_minkowski(&bp)?))),
            Point::Bulk(c) => {
                let mut coords = vec![bp.tau];
                coords.extend(crate::spacetimes::sphere_angles(&bp.e));
                Ok(Point::Bulk(ChartPoint::new(&c.chart_id, &coords)))
            }
        }
    }
}

/// Seed and sample count for Monte Carlo estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sampler {
    pub seed: u64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

const CHUNK: usize = 4096;

/// Monte Carlo mean of `f` over the box `lo..hi`, times the box volume.
/// Each chunk has its own ChaCha stream, so the result does not depend on
/// the thread count.
pub fn box_integral(lo: &[f64], hi: &[f64], sampler: Sampler, f: impl Fn(&[f64]) -> f64 + Sync) -> VolumeEstimate {
    let n = sampler.n;
    if n == 0 {
        return VolumeEstimate { value: 0.0, std_error: 0.0, samples: 0 };
    }
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(n - c * CHUNK);
            let mut x = vec![0.0; lo.len()];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                for i in 0..lo.len() {
                    x[i] = lo[i] + (hi[i] - lo[i]) * rng.gen::<f64>();
                }
                let v = f(&x);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    let mean = s / n as f64;
    let var = (s2 / n as f64 - mean * mean).max(0.0);
    VolumeEstimate { value: vol * mean, std_error: vol * (var / n as f64).sqrt(), samples: n }
}

/// Bulk diamond `I⁺(a) ∩ I⁻(b)` between two chart points, or a boundary diamond
/// realised in a Minkowski model.
#[derive(Debug, Clone)]
pub enum VolumeRegion {
    Bulk(ChartPoint, ChartPoint),
    Diamond(DiamondSpec),
}

/// Monte Carlo volume `∫ √|g|` of a relatively compact diamond.
pub fn diamond_volume(model: &SpacetimeModel, region: &VolumeRegion, sampler: Sampler) -> Result<VolumeEstimate> {
    let (a, b) = match region {
        VolumeRegion::Bulk(a, b) => (a.clone(), b.clone()),
        VolumeRegion::Diamond(d) => {
            if model.label != "minkowski" {
                return Err(AadsError::Unsupported("boundary diamonds are measured in a Minkowski model".into()));
            }
            validate_pair(&d.p, &d.q)?;
            let chart = model.chart_id();
            (ChartPoint::new(chart, &esu_to_minkowski(&d.p)?), ChartPoint::new(chart, &esu_to_minkowski(&d.q)?))
        }
    };
    for c in [&a, &b] {
        if c.chart_id != model.chart_id() {
            return Err(AadsError::Domain(format!("point chart {} does not match model chart {}", c.chart_id, model.chart_id())));
        }
        model.source.check_domain(&c.coords)?;
    }
    let rel = chronological_relation(model, &Point::Bulk(a.clone()), &Point::Bulk(b.clone()), CausalMode::Exact)?;
    if rel != Chronology::ChronologicalFuture {
        return Ok(VolumeEstimate { value: 0.0, std_error: 0.0, samples: 0 });
    }
    let n = model.d;
    let dt = b.coords[0] - a.coords[0];
    let (lo, hi): (Vec<f64>, Vec<f64>) = match model.chart_id() {
        "minkowski" => {
            let mut lo = vec![a.coords[0]];
            let mut hi = vec![b.coords[0]];
            for i in 1..n {
                lo.push(a.coords[i].max(b.coords[i]) - dt);
                hi.push(a.coords[i].min(b.coords[i]) + dt);
            }
            (lo, hi)
        }
        "ads_global_cartesian" => {
            let r = model.ads_radius;
            let ea = ads_conformal_event(&a, r)?;
            let chi = ea.n[n - 1].clamp(-1.0, 1.0).acos() + dt;
            if chi >= 0.5 * PI {
                return Err(AadsError::Precondition("diamond reaches the conformal boundary".into()));
            }
            let rho = r * chi.tan();
            let mut lo = vec![a.coords[0]];
            let mut hi = vec![b.coords[0]];
            for _ in 1..n {
                lo.push(-rho);
                hi.push(rho);
            }
            (lo, hi)
        }
        other => return Err(AadsError::Unsupported(format!("volume sampling box not available for chart {other}"))),
    };
    let chart = model.chart_id().to_string();
    let pa = Point::Bulk(a);
    let pb = Point::Bulk(b);
    Ok(box_integral(&lo, &hi, sampler, |x| {
        let px = Point::Bulk(ChartPoint::new(&chart, x));
        let inside = matches!(chronological_relation(model, &pa, &px, CausalMode::Exact), Ok(Chronology::ChronologicalFuture))
            && matches!(chronological_relation(model, &px, &pb, CausalMode::Exact), Ok(Chronology::ChronologicalFuture));
        if inside {
            linalg::det(&model.source.metric_f64(x), n).abs().sqrt()
        } else {
            0.0
        }
    }))
}

/// Future (`+1`) or past (`−1`) light cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeSide {
    Future,
    Past,
}

/// Boundary time at which `∂I^±(x)` meets the generator through `e`.
pub fn fermat_time(model: &SpacetimeModel, x: &ChartPoint, e: &[f64], side: ConeSide, mode: CausalMode) -> Result<f64> {
    let s = if side == ConeSide::Future { 1.0 } else { -1.0 };
    match mode {
        CausalMode::Exact => {
            let ev = exact_event(model, &Point::Bulk(x.clone()))?;
            let mut n = e.to_vec();
            if model.label == "ads" {
                n.push(0.0);
            }
            Ok(ev.t + s * sphere_distance(&ev.n, &n))
        }
        CausalMode::Numeric { n_fan } => {
            let fan = ArrivalFan::build(model, x, n_fan)?;
            Ok(fan.t0 + s * fan.arrival(fan.angle_to(e))?)
        }
    }
}

/// Bulk diamond `O_{p,q}` envelope test: `x` must lie in every wedge
/// `W_{r,s}` with `r` on `∂I⁻(p)` and `s` on `∂I⁺(q)` along the same generator.
pub fn envelope_contains(
    model: &SpacetimeModel,
    p: &ChartPoint,
    q: &ChartPoint,
    x: &ChartPoint,
    directions: &[Vec<f64>],
    mode: CausalMode,
) -> Result<bool> {
    let rel = chronological_relation(model, &Point::Bulk(p.clone()), &Point::Bulk(q.clone()), CausalMode::Exact);
    match rel {
        Ok(Chronology::ChronologicalFuture) => {}
        Ok(_) => return Err(AadsError::Precondition("q is not in the chronological future of p".into())),
        Err(AadsError::Unsupported(_)) => {}
        Err(e) => return Err(e),
    }
    if model.label == "ads" {
        // small-diamond precondition: p and q must be joined by a unique geodesic
        let gc = model_in_chart(model, "ads_global_cartesian")?;
        let pc = transition(p, "ads_global_cartesian", model.ads_radius)?;
        let qc = transition(q, "ads_global_cartesian", model.ads_radius)?;
        geodesic::connect(&gc, &pc, &qc)?;
    }
    for e in directions {
        let r = fermat_time(model, p, e, ConeSide::Past, mode)?;
        let s = fermat_time(model, q, e, ConeSide::Future, mode)?;
        let xm = fermat_time(model, x, e, ConeSide::Past, mode)?;
        let xp = fermat_time(model, x, e, ConeSide::Future, mode)?;
        if !(xm > r && xp < s) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn model_in_chart(model: &SpacetimeModel, chart: &str) -> Result<SpacetimeModel> {
    use crate::spacetimes::{build_model, Family, ModelSpec};
    if model.chart_id() == chart {
        return Ok(model.clone());
    }
    build_model(&ModelSpec::new(Family::AdsGlobal, model.d, model.ads_radius).with_chart(chart.trim_start_matches("ads_")))
}

/// Evenly spread unit vectors on S^{k−1} (golden spiral for k = 3).
pub fn sphere_directions(k: usize, n: usize) -> Vec<Vec<f64>> {
    match k {
        2 => (0..n).map(|i| {
            let a = 2.0 * PI * (i as f64 + 0.5) / n as f64;
            vec![a.cos(), a.sin()]
        }).collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    vec![z, r * a.cos(), r * a.sin()]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            (0..n)
                .map(|_| loop {
                    let v: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let nv = linalg::norm(&v);
                    if nv > 0.1 && nv <= 1.0 {
                        break v.iter().map(|x| x / nv).collect();
                    }
                })
                .collect()
        }
    }
}

/// Light-cone arrival times from a bulk point of a static spherically
/// symmetric closure chart (`ads_closure`, `schw_closure`): a planar fan of
/// null geodesics parametrised by the launch angle `α` from the outward radial
/// direction, each run to the conformal boundary.
#[derive(Debug, Clone)]
pub struct ArrivalFan {
    pub t0: f64,
    pub u0: f64,
    /// Unit radial direction of the source point.
    pub axis: Vec<f64>,
    pub alpha: Vec<f64>,
    pub psi: Vec<f64>,
    pub dt: Vec<f64>,
    /// Estimated interpolation error of the arrival time.
    pub certificate: f64,
}

pub(crate) fn spherical_closure(model: &SpacetimeModel) -> Result<SpacetimeModel> {
    let id = model.chart_id();
    let base = id.trim_end_matches("+closure");
    if base != "ads_closure" && base != "schw_closure" {
        return Err(AadsError::Unsupported(format!(
            "numeric light cones need a static spherically symmetric closure chart, got {id}"
        )));
    }
    if id.ends_with("+closure") {
        Ok(model.clone())
    } else {
        model.closure()
    }
}

/// Arrival `(Δτ, ψ)` of the planar null ray launched at angle `alpha`, or
/// `None` when it does not reach the boundary.
pub fn planar_ray(closure: &SpacetimeModel, u0: f64, alpha: f64) -> Result<Option<(f64, f64)>> {
    let n = closure.d;
    let mut x = vec![0.0; n];
    x[1] = u0;
    for a in x.iter_mut().take(n - 1).skip(2) {
        *a = 0.5 * PI;
    }
    let g = closure.source.metric_f64(&x);
    let mut v = vec![0.0; n];
    v[0] = 1.0 / (-g[0]).sqrt();
    v[1] = -alpha.cos() / g[n + 1].sqrt();
    v[n - 1] = alpha.sin() / g[n * n - 1].sqrt();
    let tr = match geodesic::integrate(closure, &GeodesicState::new(closure.point(&x), &v), &StopRule::boundary(1e4)) {
        Ok(t) => t,
        Err(AadsError::Singularity(_)) | Err(AadsError::Domain(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    Ok(tr
        .events
        .iter()
        .find(|e| e.kind == geodesic::EventKind::BoundaryHit)
        .map(|e| (e.coords[0], e.coords[n - 1])))
}

impl ArrivalFan {
    /// Fan from the bulk point `x` with `n` launch angles.
    pub fn build(model: &SpacetimeModel, x: &ChartPoint, n: usize) -> Result<ArrivalFan> {
        let closure = spherical_closure(model)?;
        let axis = sphere_embed(&x.coords[2..]);
        let mut fan = ArrivalFan::radial(&closure, x.coords[1], n)?;
        fan.t0 = x.coords[0];
        fan.axis = axis;
        Ok(fan)
    }

    /// Fan at radius `u0`, time 0, along the first azimuthal axis.
    pub fn radial(closure: &SpacetimeModel, u0: f64, n: usize) -> Result<ArrivalFan> {
        let n = n.max(8);
        let mut alpha = Vec::new();
        let mut psi = Vec::new();
        let mut dt = Vec::new();
        let mut captured_at = None;
        for k in 0..n {
            let a = PI * k as f64 / n as f64;
            match planar_ray(closure, u0, a)? {
                Some((t, p)) if p.abs() <= PI + 0.5 => {
                    alpha.push(a);
                    psi.push(p);
                    dt.push(t);
                    if p > PI {
                        break;
                    }
                }
                _ => {
                    captured_at = Some(a);
                    break;
                }
            }
        }
        if let Some(ac) = captured_at {
            // bisect the capture threshold until the arrival angle exceeds π
            let (mut lo, mut hi) = (*alpha.last().unwrap(), ac);
            let mut last_psi = *psi.last().unwrap();
            for _ in 0..60 {
                if last_psi > PI {
                    break;
                }
                let m = 0.5 * (lo + hi);
                match planar_ray(closure, u0, m)? {
                    Some((t, p)) => {
                        alpha.push(m);
                        psi.push(p);
                        dt.push(t);
                        lo = m;
                        last_psi = p;
                    }
                    None => hi = m,
                }
            }
            if last_psi <= PI {
                return Err(AadsError::Indeterminate("fan does not reach the antipodal generator".into()));
            }
        } else if *psi.last().unwrap() <= PI {
            // no capture: the radial ray through the centre lands exactly on the antipode
            let m = alpha.len();
            let (xs, ys) = (&alpha[m - 4..], &dt[m - 4..]);
            let p_end = lagrange(xs, &psi[m - 4..], PI);
            if (p_end - PI).abs() > 1e-3 {
                return Err(AadsError::Indeterminate(format!("fan end angle {p_end} is not π")));
            }
            let t_end = lagrange(xs, ys, PI);
            alpha.push(PI);
            psi.push(PI);
            dt.push(t_end);
        }
        let mut idx: Vec<usize> = (0..alpha.len()).collect();
        idx.sort_by(|&i, &j| psi[i].partial_cmp(&psi[j]).unwrap());
        let alpha: Vec<f64> = idx.iter().map(|&i| alpha[i]).collect();
        let psi: Vec<f64> = idx.iter().map(|&i| psi[i]).collect();
        let dt: Vec<f64> = idx.iter().map(|&i| dt[i]).collect();
        let mut fan = ArrivalFan { t0: 0.0, u0, axis: Vec::new(), alpha, psi, dt, certificate: 0.0 };
        fan.certificate = fan.estimate_error();
        Ok(fan)
    }

    /// Angle at the centre between the source direction and `e`.
    pub fn angle_to(&self, e: &[f64]) -> f64 {
        sphere_distance(&self.axis, e)
    }

    /// Δτ to reach angular separation `psi ∈ [0, π]`.
    pub fn arrival(&self, psi: f64) -> Result<f64> {
        let n = self.psi.len();
        if psi < -1e-12 || psi > self.psi[n - 1] + 1e-9 {
            return Err(AadsError::Indeterminate(format!("angle {psi} outside the fan range")));
        }
        let psi = psi.max(0.0);
        // even continuation through ψ = 0 keeps the stencil centred
        let k = self.psi.partition_point(|&p| p < psi).clamp(1, n - 1);
        let lo = k.saturating_sub(2);
        let hi = (lo + 4).min(n);
        let lo = hi.saturating_sub(4);
        Ok(lagrange(&self.psi[lo..hi], &self.dt[lo..hi], psi))
    }

    /// Leave-one-out interpolation error over interior nodes with ψ ≤ π.
    fn estimate_error(&self) -> f64 {
        let n = self.psi.len();
        let mut worst: f64 = 0.0;
        for i in 2..n.saturating_sub(2) {
            if self.psi[i] > PI {
                break;
            }
            let xs: Vec<f64> = [i - 2, i - 1, i + 1, i + 2].iter().map(|&j| self.psi[j]).collect();
            let ys: Vec<f64> = [i - 2, i - 1, i + 1, i + 2].iter().map(|&j| self.dt[j]).collect();
            worst = worst.max((lagrange(&xs, &ys, self.psi[i]) - self.dt[i]).abs());
        }
        // leave-one-out doubles the spacing; the h⁴ stencil error is 16× smaller
        worst / 16.0
    }
}

/// Lagrange interpolation through the given nodes.
pub fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..xs.len() {
        let mut w = 1.0;
        for j in 0..xs.len() {
            if i != j {
                w *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        s += w * ys[i];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spacetimes::{build_model, Family, ModelSpec};

    fn bp(tau: f64, e: &[f64]) -> BoundaryPoint {
        BoundaryPoint::new(tau, e).unwrap()
    }

    #[test]
    fn complement_is_an_involution() {
        let m = build_model(&ModelSpec::new(Family::AdsGlobal, 4, 1.0)).unwrap();
        let w = WedgeSpec::new(bp(0.0, &[1.0, 0.0, 0.0]), bp(2.0, &[1.0, 0.0, 0.0])).unwrap();
        let c = causal_complement(&w, &m).unwrap();
        assert!((c.p.tau - (2.0 - PI)).abs() < 1e-15 && c.p.e[0] == -1.0);
        let cc = causal_complement(&c, &m).unwrap();
        assert!((cc.p.tau - w.p.tau).abs() < 1e-12 && (cc.q.tau - w.q.tau).abs() < 1e-12);
    }

    #[test]
    fn non_minkowski_domain_pair_is_rejected() {
        let p = bp(0.0, &[1.0, 0.0, 0.0]);
        let q = antipodal(&bp(0.3, &[1.0, 0.0, 0.0]));
        assert!(matches!(WedgeSpec::new(p, q), Err(AadsError::Precondition(_))));
    }

    #[test]
    fn flat_flow_of_the_origin() {
        let m = build_model(&ModelSpec::new(Family::Minkowski, 2, 1.0)).unwrap();
        let w = WedgeSpec::new(minkowski_to_esu(&[-1.0, 0.0]).unwrap(), minkowski_to_esu(&[1.0, 0.0]).unwrap()).unwrap();
        for lam in [-2.0, 0.5, 3.0] {
            let Point::Bulk(y) = wedge_flow(&m, &w, &Point::Bulk(m.point(&[0.0, 0.0])), lam).unwrap() else { panic!() };
            assert!((y.coords[0] - (0.5 * lam).tanh()).abs() < 1e-12, "{lam} {:?}", y.coords);
            assert!(y.coords[1].abs() < 1e-12);
        }
    }

    #[test]
    fn radial_light_crossing_relation() {
        let m = build_model(&ModelSpec::new(Family::AdsGlobal, 4, 1.0).with_chart("global_cartesian")).unwrap();
        let a = Point::Bulk(m.point(&[0.0, 0.0, 0.0, 0.0]));
        let before = Point::Boundary(bp(0.5 * PI - 0.01, &[0.0, 1.0, 0.0]));
        let after = Point::Boundary(bp(0.5 * PI + 0.01, &[0.0, 1.0, 0.0]));
        assert_eq!(chronological_relation(&m, &a, &before, CausalMode::Exact).unwrap(), Chronology::Spacelike);
        assert_eq!(chronological_relation(&m, &a, &after, CausalMode::Exact).unwrap(), Chronology::ChronologicalFuture);
    }

    #[test]
    fn ads_fan_matches_exact_cone() {
        let m = build_model(&ModelSpec::new(Family::AdsClosure, 4, 1.0)).unwrap();
        let x = m.point(&[0.0, 0.8, 0.5 * PI, 0.3]);
        let fan = ArrivalFan::build(&m, &x, 48).unwrap();
        let g = build_model(&ModelSpec::new(Family::AdsGlobal, 4, 1.0)).unwrap();
        let xg = transition(&x, "ads_global", 1.0).unwrap();
        for e in sphere_directions(3, 10) {
            let exact = fermat_time(&g, &xg, &e, ConeSide::Future, CausalMode::Exact).unwrap();
            let num = fan.t0 + fan.arrival(fan.angle_to(&e)).unwrap();
            assert!((exact - num).abs() < 1e-6, "{exact} {num} cert {}", fan.certificate);
        }
    }
}
