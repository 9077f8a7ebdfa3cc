//! End-to-end harnesses: boundary-to-boundary time delay, Fermat potentials
//! and their extremum property, and the overlap of wedge complements.
//!
//! Every harness works in a static spherically symmetric closure chart
//! (`ads_closure`, `schw_closure`), where boundary points are ordinary points
//! at `u = 0`.

use crate::error::{AadsError, Result};
use crate::geodesic::{self, GeodesicState, StopRule};
use crate::linalg;
use crate::numerics;
use crate::ode::OdeOptions;
use crate::regions::{
    self, fermat_time, validate_pair, ArrivalFan, CausalMode, ConeSide, Sampler, VolumeEstimate,
};
use crate::spacetimes::{
    antipodal, build_model, sphere_angles, sphere_distance, sphere_embed, BoundaryPoint, Family, ModelSpec,
};
use crate::tensor_core::{ChartPoint, SpacetimeModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

/// Closure model in a spherical closure chart for an AdS or Schwarzschild-AdS model.
pub fn spherical_closure_of(model: &SpacetimeModel) -> Result<SpacetimeModel> {
    if model.label == "ads" && !model.chart_id().starts_with("ads_closure") {
        let m = build_model(&ModelSpec::new(Family::AdsClosure, model.d, model.ads_radius))?;
        return m.closure();
    }
    regions::spherical_closure(model)
}

fn equator(n: usize) -> Vec<f64> {
    // polar angles π/2, azimuth 0: far from every coordinate pole
    let mut a = vec![0.5 * PI; n.saturating_sub(1)];
    a.push(0.0);
    a
}

/// Orthonormal basis of the tangent space of S^{k−1} at `e`.
fn tangent_basis(e: &[f64]) -> Vec<Vec<f64>> {
    let k = e.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for i in 0..k {
        let mut v = vec![0.0; k];
        v[i] = 1.0;
        let c = linalg::dot(&v, e);
        for (vj, ej) in v.iter_mut().zip(e) {
            *vj -= c * ej;
        }
        for b in &out {
            let c = linalg::dot(&v, b);
            for (vj, bj) in v.iter_mut().zip(b) {
                *vj -= c * bj;
            }
        }
        let nv = linalg::norm(&v);
        if nv > 1e-6 {
            out.push(v.iter().map(|x| x / nv).collect());
        }
        if out.len() == k - 1 {
            break;
        }
    }
    out
}

/// Static spherically symmetric closure geometry along the equatorial plane.
struct Radial<'a> {
    closure: &'a SpacetimeModel,
    u_top: f64,
}

impl<'a> Radial<'a> {
    fn new(closure: &'a SpacetimeModel) -> Self {
        let n = closure.d;
        let ok = |u: f64| {
            let mut x = vec![0.0, u];
            x.extend(equator(n - 2));
            closure.source.check_domain(&x).is_ok()
        };
        let (mut lo, mut hi) = (0.0, 2.0);
        if ok(hi) {
            lo = hi;
        }
        for _ in 0..60 {
            let m = 0.5 * (lo + hi);
            if ok(m) {
                lo = m;
            } else {
                hi = m;
            }
        }
        Radial { closure, u_top: lo }
    }

    fn metric(&self, u: f64) -> Vec<f64> {
        let n = self.closure.d;
        let mut x = vec![0.0, u];
        x.extend(equator(n - 2));
        self.closure.source.metric_f64(&x)
    }

    /// `g_φφ / (−g_tt)`: conformally invariant, so the same in g and ḡ.
    fn ratio(&self, u: f64) -> f64 {
        let n = self.closure.d;
        let g = self.metric(u);
        g[n * n - 1] / -g[0]
    }

    /// Areal radius `√ḡ_φφ / u`.
    fn areal(&self, u: f64) -> f64 {
        let n = self.closure.d;
        self.metric(u)[n * n - 1].sqrt() / u
    }

    fn u_of_areal(&self, r: f64) -> Result<f64> {
        numerics::bisect(|u| self.areal(u) - r, 1e-9, self.u_top * (1.0 - 1e-12), 1e-14)
    }

    /// Photon sphere: interior minimum of the ratio, `None` when the ratio
    /// decreases all the way to the centre.
    fn photon_sphere(&self) -> Option<f64> {
        let n = 400;
        let top = self.u_top * (1.0 - 1e-9);
        let h = |u: f64| self.ratio(u);
        let us: Vec<f64> = (1..=n).map(|i| top * i as f64 / n as f64).collect();
        let k = (0..n).min_by(|&i, &j| h(us[i]).partial_cmp(&h(us[j])).unwrap()).unwrap();
        if k == n - 1 {
            return None;
        }
        let dh = |u: f64| {
            let s = 1e-6 * top;
            h(u + s) - h(u - s)
        };
        let lo = us[k.saturating_sub(1)].max(1e-6);
        let hi = us[(k + 1).min(n - 1)];
        numerics::bisect(dh, lo, hi, 1e-13).ok()
    }
}

/// A launch direction from a boundary point: angle `beta` from the inward
/// normal and unit tangent `w` on the boundary sphere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaunchDirection {
    pub beta: f64,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arrival {
    pub direction: LaunchDirection,
    pub point: BoundaryPoint,
    /// τ_arrival − τ(p̄).
    pub delay: f64,
    /// Angle between the arrival direction and −e.
    pub miss: f64,
    /// |Δτ| between the default and a loosened integration tolerance.
    pub error: f64,
    /// Areal radius of the turning point (0 when the ray reaches the centre).
    pub turning_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayReport {
    pub source: BoundaryPoint,
    pub antipode: BoundaryPoint,
    pub directions: Vec<LaunchDirection>,
    pub arrivals: Vec<Arrival>,
    /// Directions dropped by the photon-region rule.
    pub excluded: Vec<LaunchDirection>,
    /// Admissible rays that did not reach the boundary.
    pub trapped: usize,
    pub photon_sphere_radius: Option<f64>,
    pub min_delay: f64,
    pub max_delay: f64,
    pub max_miss: f64,
    pub error_bar: f64,
}

/// Launch directions: `β_k = (π/2)(k + ½)/n`, tangents spread over the boundary sphere.
pub fn launch_directions(e: &[f64], n: usize) -> Vec<LaunchDirection> {
    let basis = tangent_basis(e);
    let k = basis.len();
    let tang = regions::sphere_directions(k.max(2), n);
    (0..n)
        .map(|i| {
            let beta = 0.5 * PI * (i as f64 + 0.5) / n as f64;
            let c: Vec<f64> = if k == 1 { vec![if i % 2 == 0 { 1.0 } else { -1.0 }] } else { tang[i].clone() };
            let mut w = vec![0.0; e.len()];
            for (cj, b) in c.iter().zip(&basis) {
                for (wj, bj) in w.iter_mut().zip(b) {
                    *wj += cj * bj;
                }
            }
            let nw = linalg::norm(&w);
            LaunchDirection { beta, w: w.iter().map(|x| x / nw).collect() }
        })
        .collect()
}

/// Fires one null ray from `(τ, e)` on the boundary and returns its future
/// boundary endpoint. The ray is integrated in the frame rotated so that `e`
/// sits on the coordinate equator and `w` points along the azimuth.
fn boundary_ray(
    closure: &SpacetimeModel,
    p: &BoundaryPoint,
    dir: &LaunchDirection,
    opts: &OdeOptions,
) -> Result<Option<BoundaryPoint>> {
    let n = closure.d;
    let ang = equator(n - 2);
    let e0 = sphere_embed(&ang);
    // unit azimuthal direction at the reference point
    let mut wphi = vec![0.0; n - 1];
    wphi[n - 2] = 1.0;
    let mut x = vec![p.tau, 0.0];
    x.extend(&ang);
    let g = closure.source.metric_f64(&x);
    let mut v = vec![0.0; n];
    v[0] = 1.0 / (-g[0]).sqrt();
    v[1] = dir.beta.cos() / g[n + 1].sqrt();
    v[n - 1] = dir.beta.sin() / g[n * n - 1].sqrt();
    let tr = match geodesic::integrate_with(
        closure,
        &GeodesicState::new(closure.point(&x), &v),
        &StopRule::boundary(1e4),
        &geodesic::JacobiSeed::None,
        opts,
    ) {
        Ok(t) => t,
        Err(AadsError::Singularity(_)) | Err(AadsError::Domain(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let Some(hit) = tr.boundary_hit() else { return Ok(None) };
    let (a, b) = (linalg::dot(&hit.e, &e0), linalg::dot(&hit.e, &wphi));
    let out: Vec<f64> = p.e.iter().zip(&dir.w).map(|(ei, wi)| a * ei + b * wi).collect();
    let no = linalg::norm(&out);
    Ok(Some(BoundaryPoint { tau: hit.tau, e: out.iter().map(|x| x / no).collect() }))
}

/// Boundary-to-boundary null fan from `p`, compared against the antipodal point.
pub fn time_delay(model: &SpacetimeModel, p: &BoundaryPoint, n_directions: usize) -> Result<DelayReport> {
    let closure = spherical_closure_of(model)?;
    let n = closure.d;
    if p.e.len() != n - 1 {
        return Err(AadsError::Domain(format!("boundary point has {} components, expected {}", p.e.len(), n - 1)));
    }
    if n_directions == 0 {
        return Err(AadsError::Config("n_directions must be positive".into()));
    }
    let radial = Radial::new(&closure);
    let u_ph = radial.photon_sphere();
    let r_ph = u_ph.map(|u| radial.areal(u));
    let h_ph = u_ph.map(|u| radial.ratio(u));
    let directions = launch_directions(&p.e, n_directions);
    let antipode = antipodal(p);
    let mut excluded = Vec::new();
    let mut admissible = Vec::new();
    for dir in &directions {
        let b2 = dir.beta.sin().powi(2);
        let turning = match (u_ph, h_ph) {
            (Some(uph), Some(hph)) => {
                if b2 <= hph {
                    None
                } else {
                    let u = numerics::bisect(|u| radial.ratio(u) - b2, 1e-12, uph, 1e-14)?;
                    Some(radial.areal(u))
                }
            }
            _ => {
                let h0 = radial.ratio(radial.u_top * (1.0 - 1e-9));
                if b2 <= h0 {
                    Some(0.0)
                } else {
                    let u = numerics::bisect(|u| radial.ratio(u) - b2, 1e-12, radial.u_top * (1.0 - 1e-9), 1e-14)?;
                    Some(radial.areal(u))
                }
            }
        };
        match (turning, r_ph) {
            (Some(rt), Some(rph)) if rt >= 1.2 * rph => admissible.push((dir.clone(), rt)),
            (Some(rt), None) => admissible.push((dir.clone(), rt)),
            _ => excluded.push(dir.clone()),
        }
    }
    let tight = OdeOptions::default();
    let loose = OdeOptions { rtol: 1e-9, atol: 1e-9, ..OdeOptions::default() };
    let rays: Vec<Result<Option<Arrival>>> = admissible
        .par_iter()
        .map(|(dir, rt)| {
            let Some(hit) = boundary_ray(&closure, p, dir, &tight)? else { return Ok(None) };
            let check = boundary_ray(&closure, p, dir, &loose)?;
            let delay = hit.tau - antipode.tau;
            let error = check.map(|c| (c.tau - hit.tau).abs()).unwrap_or(f64::INFINITY);
            let miss = sphere_distance(&hit.e, &antipode.e);
            Ok(Some(Arrival { direction: dir.clone(), point: hit, delay, miss, error, turning_radius: *rt }))
        })
        .collect();
    let mut arrivals = Vec::new();
    let mut trapped = 0;
    for r in rays {
        match r? {
            Some(a) => arrivals.push(a),
            None => trapped += 1,
        }
    }
    let fold = |f: fn(f64, f64) -> f64, init: f64, g: &dyn Fn(&Arrival) -> f64| arrivals.iter().map(g).fold(init, f);
    Ok(DelayReport {
        source: p.clone(),
        min_delay: fold(f64::min, f64::INFINITY, &|a| a.delay),
        max_delay: fold(f64::max, f64::NEG_INFINITY, &|a| a.delay),
        max_miss: fold(f64::max, 0.0, &|a| a.miss),
        error_bar: fold(f64::max, 0.0, &|a| a.error),
        antipode,
        directions,
        arrivals,
        excluded,
        trapped,
        photon_sphere_radius: r_ph,
    })
}

impl DelayReport {
    pub fn csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self
            .arrivals
            .iter()
            .map(|a| vec![a.direction.beta, a.point.tau, a.delay, a.miss, a.error, a.turning_radius])
            .collect();
        crate::io::csv(&["beta", "tau_arrival", "delay", "miss", "error", "turning_radius"], &rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FermatEntry {
    pub theta: Vec<f64>,
    /// `None` when the arrival surface does not cover this generator.
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FermatTable {
    pub side: ConeSide,
    pub entries: Vec<FermatEntry>,
    /// Interpolation error of the arrival surface (0 in exact mode).
    pub certificate: f64,
}

impl FermatTable {
    pub fn flagged(&self) -> usize {
        self.entries.iter().filter(|e| e.tau.is_none()).count()
    }

    pub fn csv(&self) -> String {
        let k = self.entries.first().map(|e| e.theta.len()).unwrap_or(0);
        let mut header: Vec<String> = (0..k).map(|i| format!("theta_{i}")).collect();
        header.push("tau".into());
        let h: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let rows: Vec<Vec<f64>> = self
            .entries
            .iter()
            .map(|e| {
                let mut r = e.theta.clone();
                r.push(e.tau.unwrap_or(f64::NAN));
                r
            })
            .collect();
        crate::io::csv(&h, &rows)
    }
}

/// Boundary times `τ±(r, θ)` at which `∂I±(r)` crosses the generators `θ`.
pub fn fermat_potential(
    model: &SpacetimeModel,
    r: &ChartPoint,
    thetas: &[Vec<f64>],
    side: ConeSide,
    mode: CausalMode,
) -> Result<FermatTable> {
    let s = if side == ConeSide::Future { 1.0 } else { -1.0 };
    match mode {
        CausalMode::Exact => {
            let entries = thetas
                .iter()
                .map(|th| Ok(FermatEntry { theta: th.clone(), tau: Some(fermat_time(model, r, th, side, mode)?) }))
                .collect::<Result<Vec<_>>>()?;
            Ok(FermatTable { side, entries, certificate: 0.0 })
        }
        CausalMode::Numeric { n_fan } => {
            let fan = ArrivalFan::build(model, r, n_fan)?;
            let entries = thetas
                .iter()
                .map(|th| FermatEntry { theta: th.clone(), tau: fan.arrival(fan.angle_to(th)).ok().map(|a| fan.t0 + s * a) })
                .collect();
            Ok(FermatTable { side, entries, certificate: fan.certificate })
        }
    }
}

/// Sampled closed surface spanning a bulk diamond, with edge labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSample {
    pub points: Vec<ChartPoint>,
    pub edge: Vec<bool>,
    /// Largest gap between neighbouring edge samples, in conformal angle.
    pub resolution: f64,
}

impl SurfaceSample {
    /// Middle time slice of the AdS diamond `I⁺(p) ∩ I⁻(q)` for `p`, `q` at the
    /// same spatial position: a geodesic ball of the conformal sphere whose
    /// rim is the diamond's edge. Points are returned in `ads_global_cartesian`.
    pub fn ads_mid_slice(model: &SpacetimeModel, p: &ChartPoint, q: &ChartPoint, n_edge: usize, n_interior: usize, seed: u64) -> Result<Self> {
        if model.label != "ads" {
            return Err(AadsError::Unsupported("mid-slice surfaces are built from the exact AdS cones".into()));
        }
        let r = model.ads_radius;
        let ep = regions::ads_conformal_event(p, r)?;
        let eq = regions::ads_conformal_event(q, r)?;
        if sphere_distance(&ep.n, &eq.n) > 1e-12 {
            return Err(AadsError::Precondition("p and q must share their spatial position".into()));
        }
        let a = 0.5 * (eq.t - ep.t);
        let k = ep.n.len();
        let c = ep.n[k - 1];
        if !(a > 0.0) || a >= 0.5 * PI - c.acos() {
            return Err(AadsError::Precondition(format!("diamond half-height {a} must be positive and stay inside the bulk")));
        }
        let t = 0.5 * (eq.t + ep.t);
        let basis = tangent_basis(&ep.n);
        let at = |chi: f64, dir: &[f64]| -> ChartPoint {
            let mut m: Vec<f64> = ep.n.iter().map(|v| v * chi.cos()).collect();
            for (cj, b) in dir.iter().zip(&basis) {
                for (mj, bj) in m.iter_mut().zip(b) {
                    *mj += chi.sin() * cj * bj;
                }
            }
            let last = m[k - 1];
            let mut coords = vec![t];
            coords.extend(m[..k - 1].iter().map(|v| r * v / last));
            ChartPoint::new("ads_global_cartesian", &coords)
        };
        let dirs = regions::sphere_directions(k - 1, n_edge);
        let mut points: Vec<ChartPoint> = dirs.iter().map(|w| at(a, w)).collect();
        let mut edge = vec![true; points.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..n_interior {
            let w: Vec<f64> = loop {
                let v: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let nv = linalg::norm(&v);
                if nv > 0.1 && nv <= 1.0 {
                    break v.iter().map(|x| x / nv).collect();
                }
            };
            let chi = a * rng.gen::<f64>().powf(1.0 / (k - 1) as f64) * (1.0 - 1e-9);
            points.push(at(chi, &w));
            edge.push(false);
        }
        // edge directions are unit vectors; the rim gap in conformal angle is sin(a)·gap
        let mut gap: f64 = 0.0;
        for (i, di) in dirs.iter().enumerate() {
            let nearest = dirs
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, dj)| sphere_distance(di, dj))
                .fold(f64::INFINITY, f64::min);
            gap = gap.max(nearest);
        }
        Ok(SurfaceSample { points, edge, resolution: a.sin() * gap })
    }

    /// Negative control: drops the edge samples while keeping the labels of the rest.
    pub fn without_edge(&self) -> Self {
        let keep: Vec<usize> = (0..self.points.len()).filter(|&i| !self.edge[i]).collect();
        SurfaceSample {
            points: keep.iter().map(|&i| self.points[i].clone()).collect(),
            edge: vec![false; keep.len()],
            resolution: self.resolution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub generator: usize,
    pub side: ConeSide,
    /// Index of the maximising (future) or minimising (past) sample.
    pub sample: usize,
    /// How far the extremum exceeds the best edge sample.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremumReport {
    pub generators: usize,
    pub samples: usize,
    pub tolerance: f64,
    pub violations: Vec<Violation>,
}

/// Checks that `max τ₊(·, θ)` and `min τ₋(·, θ)` over the sampled surface are
/// attained on edge samples, within the sampling resolution.
pub fn fermat_extremum_check(
    model: &SpacetimeModel,
    surface: &SurfaceSample,
    generators: &[Vec<f64>],
    mode: CausalMode,
) -> Result<ExtremumReport> {
    // Fermat potentials are 1-Lipschitz in the conformal angle
    let tolerance = surface.resolution + 1e-12;
    let mut violations = Vec::new();
    for side in [ConeSide::Future, ConeSide::Past] {
        let s = if side == ConeSide::Future { 1.0 } else { -1.0 };
        let tables: Vec<FermatTable> = surface
            .points
            .iter()
            .map(|x| fermat_potential(model, x, generators, side, mode))
            .collect::<Result<_>>()?;
        for (g, _) in generators.iter().enumerate() {
            let vals: Vec<f64> = tables
                .iter()
                .map(|t| t.entries[g].tau.map(|v| s * v).ok_or_else(|| AadsError::Indeterminate(format!("generator {g} not covered"))))
                .collect::<Result<_>>()?;
            let (imax, vmax) = vals.iter().cloned().enumerate().fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a });
            if surface.edge[imax] {
                continue;
            }
            let best_edge = vals.iter().zip(&surface.edge).filter(|(_, e)| **e).map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
            if vmax - best_edge > tolerance {
                violations.push(Violation { generator: g, side, sample: imax, excess: vmax - best_edge });
            }
        }
    }
    Ok(ExtremumReport { generators: generators.len(), samples: surface.points.len(), tolerance, violations })
}

/// Boundary times along one null generator of `∂I⁻(q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorTimes {
    /// Future endpoint of the generator.
    pub s1: f64,
    /// `∂I⁺(q)` on the time generator through `s1`.
    pub s2: f64,
    /// `∂I⁺(r)` on the same time generator.
    pub s3: f64,
}

/// Follows the past-directed null geodesic from `q` with spatial launch
/// direction `(cos α, sin α)` in the `(u, φ)` plane for affine length
/// `lambda` to get `r`, continues it to the future boundary for `s1`, and
/// evaluates the cones of `q` and `r` on that generator. `q` is given in
/// spherical closure coordinates `(t, u, angles)`.
pub fn generator_times(model: &SpacetimeModel, q: &ChartPoint, alpha: f64, lambda: f64, mode: CausalMode) -> Result<GeneratorTimes> {
    let closure = spherical_closure_of(model)?;
    let n = closure.d;
    let base = closure.chart_id().trim_end_matches("+closure").to_string();
    let qc = closure.point(&q.coords);
    let g = closure.source.metric_f64(&q.coords);
    let mut v = vec![0.0; n];
    v[0] = 1.0 / (-g[0]).sqrt();
    v[1] = alpha.cos() / g[n + 1].sqrt();
    v[n - 1] = alpha.sin() / g[n * n - 1].sqrt();
    let fut = geodesic::integrate(&closure, &GeodesicState::new(qc.clone(), &v), &StopRule::boundary(1e4))?;
    let s1 = fut.boundary_hit().ok_or_else(|| AadsError::Indeterminate("generator does not reach the boundary".into()))?.clone();
    let back: Vec<f64> = v.iter().map(|x| -x).collect();
    let past = geodesic::integrate(&closure, &GeodesicState::new(qc, &back), &StopRule::affine(lambda))?;
    if past.events.iter().any(|e| e.kind == geodesic::EventKind::BoundaryHit) {
        return Err(AadsError::Precondition("affine length reaches the boundary".into()));
    }
    let rx = past.final_state().point.coords.clone();
    let (cm, id) = match mode {
        CausalMode::Exact => (model.clone(), base),
        CausalMode::Numeric { .. } => (closure.clone(), closure.chart_id().to_string()),
    };
    let s2 = fermat_time(&cm, &ChartPoint::new(&id, &q.coords), &s1.e, ConeSide::Future, mode)?;
    let s3 = fermat_time(&cm, &ChartPoint::new(&id, &rx), &s1.e, ConeSide::Future, mode)?;
    Ok(GeneratorTimes { s1: s1.tau, s2, s3 })
}

/// Arrival-angle offsets `F(u, ψ)` of a static spherically symmetric closure:
/// `∂I±(x)` meets the generator at angle `ψ` from `x` at `t ± F`.
enum ArrivalTable {
    /// AdS: `F = arccos(sin χ cos ψ)`, `sin χ = (4 − u²)/(4 + u²)`.
    AdsExact,
    Grid { u: Vec<f64>, fans: Vec<Option<ArrivalFan>> },
}

impl ArrivalTable {
    fn arrival(&self, u: f64, psi: f64) -> Option<f64> {
        match self {
            ArrivalTable::AdsExact => {
                let s = (4.0 - u * u) / (4.0 + u * u);
                Some((s * psi.cos()).clamp(-1.0, 1.0).acos())
            }
            ArrivalTable::Grid { u: us, fans } => {
                let m = us.len();
                let k = us.partition_point(|&x| x < u).clamp(2, m - 2);
                let idx = [k - 2, k - 1, k, k + 1];
                let mut ys = [0.0; 4];
                for (j, &i) in idx.iter().enumerate() {
                    ys[j] = match &fans[i] {
                        None => psi,
                        Some(f) => f.arrival(psi).ok()?,
                    };
                }
                let xs: Vec<f64> = idx.iter().map(|&i| us[i]).collect();
                Some(regions::lagrange(&xs, &ys, u))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapOptions {
    /// Only the exterior `r ≥ r_min` (areal radius) is sampled in numeric mode.
    pub r_min: f64,
    /// Radial nodes of the arrival table.
    pub n_u: usize,
    /// Launch angles per fan.
    pub n_fan: usize,
    /// Use fan tables even when a closed form exists.
    pub numeric: bool,
}

impl Default for OverlapOptions {
    fn default() -> Self {
        OverlapOptions { r_min: 0.5, n_u: 40, n_fan: 48, numeric: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapReport {
    pub volume: VolumeEstimate,
    pub u_max: f64,
    /// Time intervals shorter than this are below the arrival-table accuracy and count as empty.
    pub resolution: f64,
    pub flagged: usize,
}

/// Closure-metric volume of `W′_{p,q̄} ∩ W′_{q,p̄}` with `q = antipode⁻¹(q̄)`.
///
/// `x` is causally unrelated to `W_{p,q̄}` iff `x ∉ J⁺(p) ∪ J⁻(q̄)`, which in a
/// static closure reads `t − F(x, e_p) ≤ τ_p` and `t + F(x, e_q̄) ≥ τ_q̄`. The
/// four conditions cut an interval out of each static orbit, so `t` is
/// integrated exactly and only the spatial position is sampled.
pub fn wedge_overlap_volume(
    model: &SpacetimeModel,
    p: &BoundaryPoint,
    qbar: &BoundaryPoint,
    sampler: Sampler,
    opts: &OverlapOptions,
) -> Result<OverlapReport> {
    validate_pair(p, qbar)?;
    let closure = spherical_closure_of(model)?;
    let n = closure.d;
    if p.e.len() != n - 1 {
        return Err(AadsError::Domain(format!("labels have {} components, expected {}", p.e.len(), n - 1)));
    }
    let radial = Radial::new(&closure);
    let exact = model.label == "ads" && !opts.numeric;
    let (table, u_max, resolution) = if exact {
        (ArrivalTable::AdsExact, radial.u_top, 1e-12)
    } else {
        let u_max = if radial.areal(radial.u_top * (1.0 - 1e-9)) >= opts.r_min {
            radial.u_top
        } else {
            radial.u_of_areal(opts.r_min)?
        };
        if let Some(uph) = radial.photon_sphere() {
            if u_max >= uph {
                return Err(AadsError::Precondition(format!(
                    "r_min = {} reaches the photon sphere at r = {}",
                    opts.r_min,
                    radial.areal(uph)
                )));
            }
        }
        let m = opts.n_u.max(6);
        let us: Vec<f64> = (0..=m).map(|i| u_max * i as f64 / m as f64).collect();
        let fans: Vec<Option<ArrivalFan>> = us
            .par_iter()
            .map(|&u| if u == 0.0 { Ok(None) } else { ArrivalFan::radial(&closure, u, opts.n_fan).map(Some) })
            .collect::<Result<_>>()?;
        let fan_err = fans.iter().flatten().map(|f| f.certificate).fold(0.0, f64::max);
        // leave-one-out in u, scaled like the fan estimate
        let mut u_err: f64 = 0.0;
        let probe = [0.0, 0.25 * PI, 0.5 * PI, 0.75 * PI, PI];
        for i in 2..m - 1 {
            for &psi in &probe {
                let val = |j: usize| fans[j].as_ref().map_or(Some(psi), |f| f.arrival(psi).ok());
                let pts = [i - 2, i - 1, i + 1, i + 2];
                let ys: Option<Vec<f64>> = pts.iter().map(|&j| val(j)).collect();
                if let (Some(ys), Some(y)) = (ys, val(i)) {
                    let xs: Vec<f64> = pts.iter().map(|&j| us[j]).collect();
                    u_err = u_err.max((regions::lagrange(&xs, &ys, us[i]) - y).abs() / 16.0);
                }
            }
        }
        (ArrivalTable::Grid { u: us, fans }, u_max, 2.0 * (fan_err + u_err) + 1e-12)
    };
    let q = regions::antipodal_inverse(qbar);
    let pbar = antipodal(p);
    let na = n - 2;
    let mut lo = vec![0.0];
    let mut hi = vec![u_max];
    for i in 0..na {
        lo.push(0.0);
        hi.push(if i + 1 == na { 2.0 * PI } else { PI });
    }
    let flagged = AtomicUsize::new(0);
    let volume = regions::box_integral(&lo, &hi, sampler, |x| {
        let u = x[0];
        let dir = sphere_embed(&x[1..]);
        let f = |e: &[f64]| table.arrival(u, sphere_distance(&dir, e));
        let vals = (f(&p.e), f(&qbar.e), f(&q.e), f(&pbar.e));
        let (Some(fp), Some(fqb), Some(fq), Some(fpb)) = vals else {
            flagged.fetch_add(1, Ordering::Relaxed);
            return 0.0;
        };
        let top = (p.tau + fp).min(q.tau + fq);
        let bottom = (qbar.tau - fqb).max(pbar.tau - fpb);
        let len = top - bottom;
        if len <= resolution {
            return 0.0;
        }
        let mut c = vec![0.0, u];
        c.extend_from_slice(&x[1..]);
        len * linalg::det(&closure.source.metric_f64(&c), n).abs().sqrt()
    });
    Ok(OverlapReport { volume, u_max, resolution, flagged: flagged.into_inner() })
}

/// Conformal-diagram polylines `(τ, χ)` of AdS along one spatial axis, with
/// `χ = ± arctan(ρ/R)` signed by the side of the axis: the two boundary lines
/// `χ = ±π/2` over one period and the radial null geodesic through the centre
/// at `t = 0`. The geodesic is integrated in global cartesian coordinates out
/// to `ρ = 10⁴ R`; its endpoints on `χ = ±π/2` follow from `t ∓ χ` being
/// constant along radial null lines of the conformal strip.
pub fn penrose_diagram(model: &SpacetimeModel, samples: usize) -> Result<Vec<(usize, Vec<[f64; 2]>)>> {
    if model.label != "ads" {
        return Err(AadsError::Unsupported(format!("conformal diagrams are drawn for AdS, got {}", model.label)));
    }
    let (d, r) = (model.d, model.ads_radius);
    let cart = build_model(&ModelSpec::new(Family::AdsGlobal, d, r).with_chart("global_cartesian"))?;
    let m = samples.max(2);
    let side = |chi: f64| (0..=m).map(|i| [-PI + 2.0 * PI * i as f64 / m as f64, chi]).collect::<Vec<_>>();
    let mut bounds = vec![(-10.0 * PI, 10.0 * PI)];
    bounds.extend(std::iter::repeat((-1e4 * r, 1e4 * r)).take(d - 1));
    let stop = StopRule { max_affine: 1e12, boundary_event: false, domain_bounds: Some(bounds) };
    let mut ray: Vec<[f64; 2]> = Vec::new();
    for sgn in [-1.0, 1.0] {
        let mut v = vec![0.0; d];
        v[0] = sgn / r;
        v[1] = sgn;
        let tr = geodesic::integrate(&cart, &GeodesicState::new(cart.point(&vec![0.0; d]), &v), &stop)?;
        let mut half: Vec<[f64; 2]> = tr.samples.iter().map(|st| [st.point.coords[0], (st.point.coords[1] / r).atan()]).collect();
        let [t, chi] = *half.last().unwrap();
        half.push([t + sgn * 0.5 * PI - chi, sgn * 0.5 * PI]);
        if sgn < 0.0 {
            half.reverse();
            half.pop();
        }
        ray.extend(half);
    }
    Ok(vec![(0, side(-0.5 * PI)), (1, side(0.5 * PI)), (2, ray)])
}

/// Report envelope shared by every harness.
pub fn report_json(experiment: &str, model: &ModelSpec, seed: u64, results: Value, certificates: Value) -> String {
    crate::io::to_json(&json!({
        "experiment": experiment,
        "model": serde_json::to_value(model).unwrap_or(Value::Null),
        "seed": seed,
        "results": results,
        "certificates": certificates,
    }))
}

/// Boundary point `(τ, e)` with `e` on the coordinate equator (polar angles π/2, azimuth 0).
pub fn equatorial_point(d: usize, tau: f64) -> BoundaryPoint {
    BoundaryPoint { tau, e: sphere_embed(&equator(d - 2)) }
}

/// Chart coordinates `(t, u, angles)` of a point in a spherical closure chart.
pub fn closure_coords(t: f64, u: f64, e: &[f64]) -> Vec<f64> {
    let mut c = vec![t, u];
    c.extend(sphere_angles(e));
    c
}
