//! Geodesics: integration with boundary events, Jacobi transport, conjugate
//! points, null expansion, shooting, and the world function.
//!
//! Jacobi fields are transported through the variational equations of the
//! geodesic ODE; `∇J = δv + Γ(v, δx)`. With `G = g(J_i, J_j)` and
//! `M = g(∇J_i, J_j)` the expansion is `θ = tr(G⁻¹M)`.

use crate::error::{AadsError, Result};
use crate::linalg;
use crate::ode::{self, OdeOptions, OdeSolution, Termination};
use crate::spacetimes::{boundary_point_of, BoundaryPoint};
use crate::tensor_core::{connection_at, curvature_at, metric_at, ChartPoint, SpacetimeModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;

/// Conformal-factor value at which the boundary event fires.
pub const BOUNDARY_EPS: f64 = 1e-10;
/// Below this conformal factor, null rays continue in the rescaled metric.
const CLOSURE_SWITCH: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub point: ChartPoint,
    pub velocity: Vec<f64>,
    pub affine: f64,
}

impl GeodesicState {
    pub fn new(point: ChartPoint, velocity: &[f64]) -> Self {
        GeodesicState { point, velocity: velocity.to_vec(), affine: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    BoundaryHit,
    DomainExit,
    ConjugatePoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicEvent {
    pub kind: EventKind,
    pub affine: f64,
    pub boundary: Option<BoundaryPoint>,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StopRule {
    pub max_affine: f64,
    pub boundary_event: bool,
    /// Optional coordinate box; leaving it ends the integration with a domain-exit event.
    pub domain_bounds: Option<Vec<(f64, f64)>>,
}

impl StopRule {
    pub fn affine(max_affine: f64) -> Self {
        StopRule { max_affine, boundary_event: false, domain_bounds: None }
    }
    pub fn boundary(max_affine: f64) -> Self {
        StopRule { max_affine, boundary_event: true, domain_bounds: None }
    }
}

/// Initial Jacobi data.
#[derive(Debug, Clone)]
pub enum JacobiSeed {
    None,
    /// J(0) = 0, ∇J(0) spanning the complement of the velocity (transverse to an
    /// auxiliary null direction for null geodesics).
    PointSource,
    /// J(0) = 0, ∇J(0) = coordinate basis vectors; J(1) is the shooting Jacobian.
    Coordinate,
    /// Explicit (δx, δv) pairs.
    Custom(Vec<(Vec<f64>, Vec<f64>)>),
}

#[derive(Debug, Clone)]
struct Phase {
    sol: OdeSolution,
    closure: bool,
    offset: f64,
}

#[derive(Debug, Clone)]
pub struct GeodesicTrajectory {
    pub chart_id: String,
    pub d: usize,
    pub samples: Vec<GeodesicState>,
    pub events: Vec<GeodesicEvent>,
    /// Number of transported Jacobi fields.
    pub jacobi_fields: usize,
    model: SpacetimeModel,
    phases: Vec<Phase>,
}

impl GeodesicTrajectory {
    pub fn model(&self) -> &SpacetimeModel {
        &self.model
    }

    pub fn affine_range(&self) -> (f64, f64) {
        (self.samples[0].affine, self.samples.last().unwrap().affine)
    }

    fn raw(&self, lambda: f64) -> Vec<f64> {
        let ph = self
            .phases
            .iter()
            .rev()
            .find(|p| lambda >= p.offset + p.sol.t_first().min(p.sol.t_last()) - 1e-15)
            .unwrap_or(&self.phases[0]);
        ph.sol.eval(lambda - ph.offset)
    }

    /// Coordinates and velocity at affine parameter `lambda` (dense output).
    pub fn state_at(&self, lambda: f64) -> (Vec<f64>, Vec<f64>) {
        let y = self.raw(lambda);
        (y[..self.d].to_vec(), y[self.d..2 * self.d].to_vec())
    }

    pub fn final_state(&self) -> &GeodesicState {
        self.samples.last().unwrap()
    }

    pub fn boundary_hit(&self) -> Option<&BoundaryPoint> {
        self.events.iter().find(|e| e.kind == EventKind::BoundaryHit).and_then(|e| e.boundary.as_ref())
    }

    /// Jacobi fields J_i and ∇J_i at `lambda` (rows are fields).
    pub fn jacobi_at(&self, lambda: f64) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        if self.jacobi_fields == 0 {
            return Err(AadsError::Precondition("trajectory has no Jacobi transport".into()));
        }
        let n = self.d;
        let y = self.raw(lambda);
        let x = &y[..n];
        let v = &y[n..2 * n];
        let con = connection_at(&self.model, x, 1)?;
        let mut js = Vec::new();
        let mut djs = Vec::new();
        for f in 0..self.jacobi_fields {
            let base = 2 * n + 2 * n * f;
            let dx = &y[base..base + n];
            let dv = &y[base + n..base + 2 * n];
            let mut dj = dv.to_vec();
            for (i, dji) in dj.iter_mut().enumerate() {
                for j in 0..n {
                    for k in 0..n {
                        *dji += con.gam(i, j, k) * v[j] * dx[k];
                    }
                }
            }
            js.push(dx.to_vec());
            djs.push(dj);
        }
        Ok((js, djs))
    }

    /// (G, M) Gram data of the Jacobi fields at `lambda`.
    pub fn gram_at(&self, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (js, djs) = self.jacobi_at(lambda)?;
        let (x, _) = self.state_at(lambda);
        let g = self.model.source.metric_f64(&x);
        let k = js.len();
        let mut gm = vec![0.0; k * k];
        let mut mm = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                gm[i * k + j] = linalg::quad(&g, &js[i], &js[j]);
                mm[i * k + j] = linalg::quad(&g, &djs[i], &js[j]);
            }
        }
        Ok((gm, mm))
    }

    /// Expansion θ = tr(G⁻¹M) at `lambda`.
    pub fn expansion_at(&self, lambda: f64) -> Result<f64> {
        let (gm, mm) = self.gram_at(lambda)?;
        let k = self.jacobi_fields;
        let inv = linalg::inverse_f64(&gm, k).ok_or_else(|| AadsError::Singularity("caustic".into()))?;
        Ok((0..k).map(|i| (0..k).map(|j| inv[i * k + j] * mm[j * k + i]).sum::<f64>()).sum())
    }

    /// 1/θ written as 2 det G / tr(adj(G) (M + Mᵀ)); smooth through focal points.
    pub fn inverse_expansion_at(&self, lambda: f64) -> Result<f64> {
        let (gm, mm) = self.gram_at(lambda)?;
        let k = self.jacobi_fields;
        let adj = linalg::adjugate(&gm, k);
        let mut tr = 0.0;
        for i in 0..k {
            for j in 0..k {
                tr += adj[i * k + j] * (mm[j * k + i] + mm[i * k + j]);
            }
        }
        Ok(2.0 * linalg::det(&gm, k) / tr)
    }

    /// Determinant of the coordinate matrix of Jacobi fields (square case) or √|det G|.
    pub fn det_jacobi_at(&self, lambda: f64) -> Result<f64> {
        let (js, _) = self.jacobi_at(lambda)?;
        let k = js.len();
        if k == self.d {
            let flat: Vec<f64> = js.iter().flatten().copied().collect();
            Ok(linalg::det(&flat, k))
        } else {
            let (gm, _) = self.gram_at(lambda)?;
            Ok(linalg::det(&gm, k).abs().sqrt())
        }
    }
}

fn field_count(seed: &JacobiSeed, n: usize, v: &[f64], model: &SpacetimeModel, x: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    Ok(match seed {
        JacobiSeed::None => Vec::new(),
        JacobiSeed::Coordinate => (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                (vec![0.0; n], e)
            })
            .collect(),
        JacobiSeed::PointSource => {
            let g = model.source.metric_f64(x);
            transverse_basis(&g, v)?.into_iter().map(|e| (vec![0.0; n], e)).collect()
        }
        JacobiSeed::Custom(v) => v.clone(),
    })
}

/// g-orthonormal vectors spanning the complement of `v` (for null `v`, also
/// orthogonal to an auxiliary null vector, leaving d−2 spacelike vectors).
pub fn transverse_basis(g: &[f64], v: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = v.len();
    let vv = linalg::quad(g, v, v);
    let scale = linalg::norm(v).powi(2).max(1e-300);
    let null = vv.abs() < 1e-9 * scale;
    let mut fixed: Vec<Vec<f64>> = Vec::new();
    if null {
        // unit timelike T from the coordinate basis, then project the rest off span{v, T}
        let mut t = None;
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let ee = linalg::quad(g, &e, &e);
            if ee < -1e-12 {
                t = Some(e.iter().map(|c| c / (-ee).sqrt()).collect::<Vec<f64>>());
                break;
            }
        }
        let t = t.ok_or_else(|| AadsError::Domain("no timelike coordinate direction".into()))?;
        fixed.push(v.to_vec());
        fixed.push(t);
    } else {
        fixed.push(v.to_vec());
    }
    let project = |w: &mut Vec<f64>, fixed: &[Vec<f64>]| {
        if null {
            let k = &fixed[0];
            let t = &fixed[1];
            // solve for a, b with g(w + a k + b T, k) = g(w + a k + b T, T) = 0
            let gkt = linalg::quad(g, k, t);
            let gtt = linalg::quad(g, t, t);
            let gwk = linalg::quad(g, w, k);
            let gwt = linalg::quad(g, w, t);
            let b = -gwk / gkt;
            let a = -(gwt + b * gtt) / gkt;
            for i in 0..w.len() {
                w[i] += a * k[i] + b * t[i];
            }
        } else {
            let c = linalg::quad(g, w, v) / vv;
            for i in 0..w.len() {
                w[i] -= c * v[i];
            }
        }
    };
    let want = if null { n - 2 } else { n - 1 };
    let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..n {
        if out.len() == want {
            break;
        }
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        project(&mut w, &fixed);
        for (b, sb) in &out {
            let c = linalg::quad(g, &w, b) / sb;
            for k in 0..n {
                w[k] -= c * b[k];
            }
        }
        let ww = linalg::quad(g, &w, &w);
        if ww.abs() < 1e-8 * linalg::norm(&w).powi(2).max(1e-300) || linalg::norm(&w) < 1e-10 {
            continue;
        }
        let s = ww.abs().sqrt();
        let w: Vec<f64> = w.iter().map(|c| c / s).collect();
        out.push((w, ww.signum()));
    }
    if out.len() != want {
        return Err(AadsError::DegeneratePlane("could not complete a transverse basis".into()));
    }
    Ok(out.into_iter().map(|(w, _)| w).collect())
}

fn rhs(model: &SpacetimeModel, y: &[f64], n: usize, k: usize) -> Result<Vec<f64>> {
    let x = &y[..n];
    let v = &y[n..2 * n];
    let con = connection_at(model, x, if k > 0 { 2 } else { 1 })?;
    let mut out = vec![0.0; y.len()];
    out[..n].copy_from_slice(v);
    // gv[i][c] = Γ^i_jc v^j
    let mut gv = vec![0.0; n * n];
    for i in 0..n {
        for c in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += con.gam(i, j, c) * v[j];
            }
            gv[i * n + c] = s;
        }
    }
    for i in 0..n {
        out[n + i] = -(0..n).map(|c| gv[i * n + c] * v[c]).sum::<f64>();
    }
    if k > 0 {
        // dgvv[l][i] = ∂_l Γ^i_jc v^j v^c
        let mut dgvv = vec![0.0; n * n];
        for l in 0..n {
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    for c in 0..n {
                        s += con.dgam(l, i, j, c) * v[j] * v[c];
                    }
                }
                dgvv[l * n + i] = s;
            }
        }
        for f in 0..k {
            let base = 2 * n + 2 * n * f;
            let dx = &y[base..base + n];
            let dv = &y[base + n..base + 2 * n];
            for i in 0..n {
                out[base + i] = dv[i];
                let mut s = 0.0;
                for l in 0..n {
                    s -= dgvv[l * n + i] * dx[l] + 2.0 * gv[i * n + l] * dv[l];
                }
                out[base + n + i] = s;
            }
        }
    }
    Ok(out)
}

fn is_null(model: &SpacetimeModel, x: &[f64], v: &[f64]) -> bool {
    let g = model.source.metric_f64(x);
    linalg::quad(&g, v, v).abs() < 1e-9 * linalg::norm(v).powi(2)
}

fn is_closure_model(model: &SpacetimeModel) -> bool {
    model.chart_id().ends_with("+closure")
}

/// Integrates the geodesic equation from `init`.
pub fn integrate(model: &SpacetimeModel, init: &GeodesicState, stop: &StopRule) -> Result<GeodesicTrajectory> {
    integrate_with(model, init, stop, &JacobiSeed::None, &OdeOptions::default())
}

pub fn integrate_with(
    model: &SpacetimeModel,
    init: &GeodesicState,
    stop: &StopRule,
    seed: &JacobiSeed,
    opts: &OdeOptions,
) -> Result<GeodesicTrajectory> {
    let n = model.d;
    let x0 = &init.point.coords;
    if init.point.chart_id != model.chart_id() {
        return Err(AadsError::Domain(format!(
            "point chart {} does not match model chart {}",
            init.point.chart_id,
            model.chart_id()
        )));
    }
    if x0.len() != n || init.velocity.len() != n {
        return Err(AadsError::Domain("state dimension mismatch".into()));
    }
    model.source.check_domain(x0)?;
    if linalg::norm(&init.velocity) == 0.0 {
        return Err(AadsError::Precondition("velocity must be nonzero".into()));
    }
    let fields = field_count(seed, n, &init.velocity, model, x0)?;
    let k = fields.len();
    let mut y0 = x0.clone();
    y0.extend_from_slice(&init.velocity);
    for (dx, dv) in &fields {
        y0.extend_from_slice(dx);
        y0.extend_from_slice(dv);
    }
    let bc = model.source.boundary_coordinate();
    let want_boundary = stop.boundary_event && bc.is_some() && is_null(model, x0, &init.velocity);
    if stop.boundary_event && bc.is_none() {
        return Err(AadsError::Unsupported(format!(
            "chart {} has no boundary face; use a closure or Poincaré chart",
            model.chart_id()
        )));
    }
    let bounds = stop.domain_bounds.clone().unwrap_or_default();
    let mut bound_events: Vec<Box<dyn Fn(f64, &[f64]) -> f64 + Sync>> = Vec::new();
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        bound_events.push(Box::new(move |_t, y: &[f64]| y[i] - lo));
        bound_events.push(Box::new(move |_t, y: &[f64]| hi - y[i]));
    }
    let closure_start = is_closure_model(model);
    let mut phases = Vec::new();
    let mut events = Vec::new();
    let run = |m: &SpacetimeModel, y: &[f64], t0: f64, t1: f64, extra: Option<f64>| -> Result<OdeSolution> {
        let zi = bc.unwrap_or(0);
        let zev = move |_t: f64, y: &[f64]| y[zi] - extra.unwrap_or(f64::NEG_INFINITY);
        let mut evs: Vec<ode::Event> = bound_events.iter().map(|b| b.as_ref() as ode::Event).collect();
        if extra.is_some() {
            evs.push(&zev);
        }
        ode::integrate(|_t, y| rhs(m, y, n, k), t0, y, t1, opts, &evs)
    };
    let nb = bound_events.len();
    if !want_boundary {
        let sol = run(model, &y0, 0.0, stop.max_affine, None)?;
        push_termination(&sol, nb, None, model, &mut events);
        phases.push(Phase { sol, closure: closure_start, offset: init.affine });
    } else if closure_start {
        let sol = run(model, &y0, 0.0, stop.max_affine, Some(BOUNDARY_EPS))?;
        push_termination(&sol, nb, Some(model), model, &mut events);
        phases.push(Phase { sol, closure: true, offset: init.affine });
    } else {
        let zi = bc.unwrap();
        let mut y = y0.clone();
        let mut offset = init.affine;
        if y[zi] > CLOSURE_SWITCH {
            let sol = run(model, &y0, 0.0, stop.max_affine, Some(CLOSURE_SWITCH))?;
            let switched = sol.termination == Termination::Event(nb);
            if !switched {
                push_termination(&sol, nb, None, model, &mut events);
            }
            y = sol.y_last().to_vec();
            offset += sol.t_last();
            phases.push(Phase { sol, closure: false, offset: init.affine });
            if !switched {
                return finish(model, phases, events, k);
            }
        }
        if k > 0 {
            return Err(AadsError::Unsupported("Jacobi transport through the boundary phase".into()));
        }
        let closure = model.closure()?;
        let z = model.conformal_factor(&y[..n]).unwrap();
        for i in 0..n {
            y[n + i] /= z * z;
        }
        let sol = run(&closure, &y, 0.0, 1e3, Some(BOUNDARY_EPS))?;
        push_termination(&sol, nb, Some(&closure), model, &mut events);
        for e in events.iter_mut() {
            e.affine += offset;
        }
        phases.push(Phase { sol, closure: true, offset });
    }
    finish(model, phases, events, k)
}

fn push_termination(
    sol: &OdeSolution,
    nb: usize,
    boundary_model: Option<&SpacetimeModel>,
    model: &SpacetimeModel,
    events: &mut Vec<GeodesicEvent>,
) {
    let n = model.d;
    let y = sol.y_last();
    match sol.termination {
        Termination::Event(i) if i == nb && boundary_model.is_some() => {
            let zi = model.source.boundary_coordinate().unwrap();
            let x = &y[..n];
            let v = &y[n..2 * n];
            // linear extrapolation from z = BOUNDARY_EPS to z = 0 in the rescaled affine parameter
            let dl = -x[zi] / v[zi];
            let xs: Vec<f64> = (0..n).map(|i| x[i] + v[i] * dl).collect();
            let bp = boundary_point_of(model.chart_id(), &xs).ok();
            events.push(GeodesicEvent { kind: EventKind::BoundaryHit, affine: sol.t_last(), boundary: bp, coords: xs });
        }
        Termination::Event(_) | Termination::DomainExit => events.push(GeodesicEvent {
            kind: EventKind::DomainExit,
            affine: sol.t_last(),
            boundary: None,
            coords: y[..n].to_vec(),
        }),
        Termination::Reached => {}
    }
}

fn finish(model: &SpacetimeModel, phases: Vec<Phase>, events: Vec<GeodesicEvent>, k: usize) -> Result<GeodesicTrajectory> {
    let n = model.d;
    let mut samples = Vec::new();
    let mut chart = model.chart_id().to_string();
    for ph in &phases {
        if ph.closure && !is_closure_model(model) {
            chart = format!("{}+closure", model.chart_id());
        }
        for (t, y) in ph.sol.ts.iter().zip(&ph.sol.ys) {
            let affine = t + ph.offset;
            if samples.last().map(|s: &GeodesicState| affine <= s.affine).unwrap_or(false) {
                continue;
            }
            samples.push(GeodesicState {
                point: ChartPoint::new(&chart, &y[..n]),
                velocity: y[n..2 * n].to_vec(),
                affine,
            });
        }
    }
    Ok(GeodesicTrajectory {
        chart_id: model.chart_id().to_string(),
        d: n,
        samples,
        events,
        jacobi_fields: k,
        model: model.clone(),
        phases,
    })
}

/// Affine parameters where the transported Jacobi fields degenerate (roots of 1/θ).
pub fn conjugate_points(traj: &GeodesicTrajectory) -> Result<Vec<f64>> {
    if traj.jacobi_fields == 0 {
        return Err(AadsError::Precondition("trajectory has no Jacobi transport".into()));
    }
    let (l0, l1) = traj.affine_range();
    let span = l1 - l0;
    // sample on accepted steps refined 4x
    let mut grid = Vec::new();
    for w in traj.samples.windows(2) {
        for s in 0..4 {
            grid.push(w[0].affine + (w[1].affine - w[0].affine) * s as f64 / 4.0);
        }
    }
    grid.push(l1);
    let start = l0 + 1e-6 * span.max(1.0);
    let f = |l: f64| traj.inverse_expansion_at(l).unwrap_or(f64::NAN);
    let mut out: Vec<f64> = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &l in grid.iter().filter(|&&l| l > start) {
        let v = f(l);
        if !v.is_finite() {
            prev = None;
            continue;
        }
        if let Some((lp, vp)) = prev {
            if vp.signum() != v.signum() || v == 0.0 {
                let (mut a, mut b, mut fa) = (lp, l, vp);
                while b - a > 1e-12 {
                    let m = 0.5 * (a + b);
                    let fm = f(m);
                    if fm.signum() == fa.signum() {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                let root = 0.5 * (a + b);
                // a root of 1/θ is small on both sides; a pole is large
                let h = 1e-6 * (1.0 + root.abs());
                let slope = (f(root + h) - f(root - h)) / (2.0 * h);
                if f(root).abs() < 1e-6 && slope.is_finite() && slope.abs() < 1e6 {
                    out.push(root);
                }
            }
        }
        prev = Some((l, v));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ExpansionHistory {
    pub lambda: Vec<f64>,
    pub theta: Vec<f64>,
    pub shear_trace: Vec<f64>,
    pub raychaudhuri_residual: Vec<f64>,
    /// First focal point of the fan, when reached.
    pub caustic: Option<f64>,
}

/// Null geodesic fan from a point, described by its apex and central null direction.
#[derive(Debug, Clone)]
pub struct FanSpec {
    pub apex: ChartPoint,
    pub direction: Vec<f64>,
    pub lambda_max: f64,
    pub samples: usize,
}

/// Expansion of the light cone of `fan.apex` along the central ray, with the
/// Raychaudhuri residual θ' + tr(B²) + Ric(k,k).
pub fn null_expansion(model: &SpacetimeModel, fan: &FanSpec) -> Result<ExpansionHistory> {
    let init = GeodesicState::new(fan.apex.clone(), &fan.direction);
    let g0 = metric_at(model, &fan.apex)?;
    if linalg::quad(&g0, &fan.direction, &fan.direction).abs() > 1e-9 * linalg::norm(&fan.direction).powi(2) {
        return Err(AadsError::Precondition("fan direction is not null".into()));
    }
    let traj = integrate_with(model, &init, &StopRule::affine(fan.lambda_max), &JacobiSeed::PointSource, &OdeOptions::default())?;
    let caustic = conjugate_points(&traj)?.first().copied();
    let (l0, l1) = traj.affine_range();
    let end = caustic.map(|c| c.min(l1)).unwrap_or(l1);
    let mut hist = ExpansionHistory {
        lambda: Vec::new(),
        theta: Vec::new(),
        shear_trace: Vec::new(),
        raychaudhuri_residual: Vec::new(),
        caustic,
    };
    let k = traj.jacobi_fields;
    let h = 1e-4 * (end - l0).max(1e-3);
    for s in 1..=fan.samples {
        let lam = l0 + (end - l0) * s as f64 / (fan.samples as f64 + 1.0);
        if lam - h <= l0 || lam + h >= end {
            continue;
        }
        let theta = traj.expansion_at(lam)?;
        let dtheta = (traj.expansion_at(lam + h)? - traj.expansion_at(lam - h)?) / (2.0 * h);
        let (gm, mm) = traj.gram_at(lam)?;
        let inv = linalg::inverse_f64(&gm, k).ok_or_else(|| AadsError::Singularity("caustic".into()))?;
        // C = M G⁻¹; tr(B²) = tr(C²)
        let mut c = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                c[i * k + j] = (0..k).map(|m| mm[i * k + m] * inv[m * k + j]).sum();
            }
        }
        let trb2: f64 = (0..k).map(|i| (0..k).map(|j| c[i * k + j] * c[j * k + i]).sum::<f64>()).sum();
        let (x, v) = traj.state_at(lam);
        let cb = curvature_at(model, &ChartPoint::new(model.chart_id(), &x))?;
        let ric = linalg::quad(&cb.ricci, &v, &v);
        hist.lambda.push(lam);
        hist.theta.push(theta);
        hist.shear_trace.push(trb2);
        hist.raychaudhuri_residual.push(dtheta + trb2 + ric);
    }
    Ok(hist)
}

#[derive(Debug, Clone, Copy)]
pub struct ConnectOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_newton: usize,
    pub tol: f64,
}

impl Default for ConnectOptions {
    fn default() -> Self {
        ConnectOptions { starts: 8, seed: 0x5eed, max_newton: 100, tol: 1e-10 }
    }
}

fn shoot(model: &SpacetimeModel, p: &ChartPoint, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = model.d;
    let traj = integrate_with(model, &GeodesicState::new(p.clone(), v), &StopRule::affine(1.0), &JacobiSeed::Coordinate, &OdeOptions::default())?;
    if (traj.final_state().affine - 1.0).abs() > 1e-12 {
        return Err(AadsError::Domain("shot left the chart domain".into()));
    }
    let y = traj.raw(1.0);
    let x1 = y[..n].to_vec();
    // jac[i][j] = ∂x1^i / ∂v^j
    let mut jac = vec![0.0; n * n];
    for j in 0..n {
        let base = 2 * n + 2 * n * j;
        for i in 0..n {
            jac[i * n + j] = y[base + i];
        }
    }
    Ok((x1, jac))
}

fn newton(model: &SpacetimeModel, p: &ChartPoint, q: &[f64], mut v: Vec<f64>, opts: &ConnectOptions) -> Option<Vec<f64>> {
    let n = model.d;
    let scale = 1.0 + linalg::norm(q);
    let miss = |x: &[f64]| x.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (mut x, mut jac) = shoot(model, p, &v).ok()?;
    let mut err = miss(&x);
    for _ in 0..opts.max_newton {
        if err < opts.tol * scale {
            return Some(v);
        }
        let f: Vec<f64> = (0..n).map(|i| q[i] - x[i]).collect();
        let dv = linalg::solve(&jac, &f, n)?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let vt: Vec<f64> = (0..n).map(|i| v[i] + alpha * dv[i]).collect();
            if let Ok((xt, jt)) = shoot(model, p, &vt) {
                let et = miss(&xt);
                if et < err {
                    v = vt;
                    x = xt;
                    jac = jt;
                    err = et;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    if err < opts.tol * scale {
        Some(v)
    } else {
        None
    }
}

/// Geodesic from `p` to `q` on the affine interval [0, 1] by damped Newton shooting.
pub fn connect(model: &SpacetimeModel, p: &ChartPoint, q: &ChartPoint) -> Result<GeodesicTrajectory> {
    connect_with(model, p, q, &ConnectOptions::default(), None)
}

pub fn connect_with(
    model: &SpacetimeModel,
    p: &ChartPoint,
    q: &ChartPoint,
    opts: &ConnectOptions,
    guess: Option<&[f64]>,
) -> Result<GeodesicTrajectory> {
    let n = model.d;
    model.source.check_domain(&p.coords)?;
    model.source.check_domain(&q.coords)?;
    let chord: Vec<f64> = (0..n).map(|i| q.coords[i] - p.coords[i]).collect();
    if linalg::norm(&chord) == 0.0 {
        return Err(AadsError::Precondition("p and q coincide".into()));
    }
    let base = guess.map(|g| g.to_vec()).unwrap_or_else(|| chord.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![base.clone()];
    let amp = 0.3 * linalg::norm(&chord);
    for _ in 0..opts.starts {
        starts.push(chord.iter().map(|c| c + amp * rng.gen_range(-1.0..1.0)).collect());
    }
    let results: Vec<Option<Vec<f64>>> = starts.par_iter().map(|s| newton(model, p, &q.coords, s.clone(), opts)).collect();
    let converged: Vec<&Vec<f64>> = results.iter().flatten().collect();
    let Some(first) = converged.first() else {
        return Err(AadsError::NonConvex(format!(
            "no shooting start converged within {} Newton steps",
            opts.max_newton
        )));
    };
    for other in &converged[1..] {
        let diff = other.iter().zip(first.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if diff > 1e-4 {
            return Err(AadsError::Ambiguous(format!("distinct initial velocities differ by {diff:.3e}")));
        }
    }
    integrate(model, &GeodesicState::new(p.clone(), first), &StopRule::affine(1.0))
}

#[derive(Debug, Clone)]
pub struct WorldFunction {
    pub gamma: f64,
    pub grad_p: Vec<f64>,
    pub grad_q: Vec<f64>,
    /// Lorentzian distance √(2Γ) for causal pairs.
    pub distance: Option<f64>,
    pub velocity: Vec<f64>,
}

/// Γ(p,q) = −½ g(γ̇, γ̇) on [0,1]; ∂_q Γ = −γ̇(1)♭, ∂_p Γ = +γ̇(0)♭.
pub fn world_function(model: &SpacetimeModel, p: &ChartPoint, q: &ChartPoint) -> Result<WorldFunction> {
    world_function_with(model, p, q, &ConnectOptions::default(), None)
}

pub fn world_function_with(
    model: &SpacetimeModel,
    p: &ChartPoint,
    q: &ChartPoint,
    opts: &ConnectOptions,
    guess: Option<&[f64]>,
) -> Result<WorldFunction> {
    let traj = connect_with(model, p, q, opts, guess)?;
    let n = model.d;
    let v0 = traj.samples[0].velocity.clone();
    let (x1, v1) = traj.state_at(1.0);
    let g0 = model.source.metric_f64(&p.coords);
    let g1 = model.source.metric_f64(&x1);
    let gamma = -0.5 * linalg::quad(&g0, &v0, &v0);
    let grad_p = linalg::mat_vec(&g0, &v0);
    let grad_q: Vec<f64> = linalg::mat_vec(&g1, &v1).iter().map(|c| -c).collect();
    let future = v0[0] > 0.0 || (n > 0 && linalg::quad(&g0, &v0, &v0) < 0.0);
    let distance = if gamma > 0.0 && future { Some((2.0 * gamma).sqrt()) } else { None };
    Ok(WorldFunction { gamma, grad_p, grad_q, distance, velocity: v0 })
}

/// CSV with columns affine, x0.., v0.., det_jacobi (empty when not transported).
pub fn trajectory_csv(traj: &GeodesicTrajectory) -> String {
    let n = traj.d;
    let mut s = String::from("affine");
    for i in 0..n {
        let _ = write!(s, ",x{i}");
    }
    for i in 0..n {
        let _ = write!(s, ",v{i}");
    }
    s.push_str(",det_jacobi\n");
    for st in &traj.samples {
        let _ = write!(s, "{}", crate::io::fmt_f64(st.affine));
        for c in st.point.coords.iter().chain(&st.velocity) {
            let _ = write!(s, ",{}", crate::io::fmt_f64(*c));
        }
        s.push(',');
        if traj.jacobi_fields > 0 {
            if let Ok(dj) = traj.det_jacobi_at(st.affine) {
                s.push_str(&crate::io::fmt_f64(dj));
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spacetimes::{build_model, Family, ModelSpec};
    use std::f64::consts::PI;

    fn flat(d: usize) -> SpacetimeModel {
        build_model(&ModelSpec::new(Family::Minkowski, d, 1.0)).unwrap()
    }

    #[test]
    fn flat_geodesic_is_straight() {
        let m = flat(4);
        let t = integrate(&m, &GeodesicState::new(m.point(&[0.0; 4]), &[1.0, 0.2, 0.0, -0.3]), &StopRule::affine(3.0)).unwrap();
        let (x, v) = t.state_at(2.0);
        assert!((x[1] - 0.4).abs() < 1e-12 && (v[3] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn radial_light_ray_reaches_boundary_at_quarter_period() {
        let m = build_model(&ModelSpec::new(Family::AdsPoincare, 4, 1.0)).unwrap();
        let t = integrate(&m, &GeodesicState::new(m.point(&[0.0, 0.0, 0.0, 1.0]), &[1.0, 0.0, 0.0, -1.0]), &StopRule::boundary(100.0))
            .unwrap();
        let b = t.boundary_hit().expect("boundary hit");
        assert!((b.tau - PI / 2.0).abs() < 1e-6, "{}", b.tau);
    }

    #[test]
    fn timelike_conjugate_point_in_ads() {
        let m = build_model(&ModelSpec::new(Family::AdsGlobal, 4, 1.0).with_chart("global_cartesian")).unwrap();
        let init = GeodesicState::new(m.point(&[0.0, 0.0, 0.0, 0.0]), &[1.0, 0.0, 0.0, 0.0]);
        let t = integrate_with(&m, &init, &StopRule::affine(4.0), &JacobiSeed::PointSource, &OdeOptions::default()).unwrap();
        let cps = conjugate_points(&t).unwrap();
        assert_eq!(cps.len(), 1, "{cps:?}");
        assert!((cps[0] - PI).abs() < 1e-6);
    }

    #[test]
    fn flat_light_cone_expansion() {
        let m = flat(4);
        let fan = FanSpec { apex: m.point(&[0.0; 4]), direction: vec![1.0, 1.0, 0.0, 0.0], lambda_max: 5.0, samples: 10 };
        let h = null_expansion(&m, &fan).unwrap();
        for (l, th) in h.lambda.iter().zip(&h.theta) {
            assert!((th - 2.0 / l).abs() < 1e-6);
        }
        assert!(h.raychaudhuri_residual.iter().all(|r| r.abs() < 1e-4));
    }

    #[test]
    fn world_function_flat() {
        let m = flat(2);
        let w = world_function(&m, &m.point(&[0.0, 0.0]), &m.point(&[1.0, 0.0])).unwrap();
        assert!((w.gamma - 0.5).abs() < 1e-12);
        assert!((w.distance.unwrap() - 1.0).abs() < 1e-12);
        let w = world_function(&m, &m.point(&[0.0, 0.0]), &m.point(&[0.0, 1.0])).unwrap();
        assert!((w.gamma + 0.5).abs() < 1e-12);
    }
}
