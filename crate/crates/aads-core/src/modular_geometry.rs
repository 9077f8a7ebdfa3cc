//! Time functions built from the world function of a causally convex frame,
//! the associated vector field `T`, its conformal-Killing defect and the
//! surface gravities on the horizons.
//!
//! With `A = Γ(p, r)` and `B = Γ(r, q)`:
//! `λ = ½ (ln A − ln B)` and
//! `T = (A ∇B − B ∇A) / (A + B + g⁻¹(dA, dB))`, so that `T(λ) = 1`.

use crate::error::{AadsError, Result};
use crate::geodesic::{connect_with, world_function_with, ConnectOptions, WorldFunction};
use crate::linalg;
use crate::numerics::richardson;
use crate::regions::{wedge_flow, Point, WedgeSpec};
use crate::spacetimes::{build_model, minkowski_to_esu, sphere_angles, BoundaryPoint, Family, ModelSpec};
use crate::tensor_core::{connection_at, ChartPoint, SpacetimeModel};

/// Endpoints `p ≪ q` and the metric in which world functions are evaluated.
#[derive(Debug, Clone)]
pub struct ModularFrame {
    pub model: SpacetimeModel,
    pub p: ChartPoint,
    pub q: ChartPoint,
    /// True when `p` and `q` are joined by a unique geodesic from every start.
    pub convexity_certificate: bool,
}

/// Field data at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularField {
    pub t: Vec<f64>,
    pub norm: f64,
    pub div: f64,
    pub killing_residual: f64,
}

fn fast() -> ConnectOptions {
    ConnectOptions { starts: 0, tol: 1e-11, ..ConnectOptions::default() }
}

impl ModularFrame {
    pub fn new(model: &SpacetimeModel, p: ChartPoint, q: ChartPoint) -> Result<Self> {
        let cert = connect_with(model, &p, &q, &ConnectOptions::default(), None).is_ok();
        Ok(ModularFrame { model: model.clone(), p, q, convexity_certificate: cert })
    }

    /// AdS wedge `W_{p,q}` realised in the compactified chart `(t, u, angles)` with metric `u² g`.
    pub fn ads_wedge(d: usize, r: f64, p: &BoundaryPoint, q: &BoundaryPoint) -> Result<Self> {
        crate::regions::validate_pair(p, q)?;
        let model = build_model(&ModelSpec::new(Family::AdsClosure, d, r))?.closure()?;
        let to_chart = |b: &BoundaryPoint| {
            let mut c = vec![b.tau, 0.0];
            c.extend(sphere_angles(&b.e));
            model.point(&c)
        };
        let (pc, qc) = (to_chart(p), to_chart(q));
        ModularFrame::new(&model, pc, qc)
    }

    fn world(&self, a: &ChartPoint, b: &ChartPoint) -> Result<WorldFunction> {
        let chord: Vec<f64> = b.coords.iter().zip(&a.coords).map(|(x, y)| x - y).collect();
        world_function_with(&self.model, a, b, &fast(), Some(&chord))
            .or_else(|_| world_function_with(&self.model, a, b, &ConnectOptions::default(), None))
    }

    /// (Γ(p,r), dΓ(p,r)/dr, Γ(r,q), dΓ(r,q)/dr) as covectors at r.
    fn gammas(&self, r: &ChartPoint) -> Result<(f64, Vec<f64>, f64, Vec<f64>)> {
        let a = self.world(&self.p, r)?;
        let b = self.world(r, &self.q)?;
        Ok((a.gamma, a.grad_q, b.gamma, b.grad_p))
    }

    /// `λ = ½ (ln Γ(p,r) − ln Γ(r,q))` from world functions.
    pub fn time_function_gamma(&self, r: &ChartPoint) -> Result<f64> {
        let (a, _, b, _) = self.gammas(r)?;
        if a <= 0.0 || b <= 0.0 {
            return Err(AadsError::OutOfRegion(format!("Γ(p,r) = {a:.3e}, Γ(r,q) = {b:.3e}: r is not inside the frame")));
        }
        Ok(0.5 * (a.ln() - b.ln()))
    }

    /// Time function; flat frames use the closed form in light-cone coordinates.
    pub fn time_function(&self, r: &ChartPoint) -> Result<f64> {
        if self.model.label == "minkowski" {
            let (zp, zm) = self.light_cone(r)?;
            return Ok(zp.atanh() + zm.atanh());
        }
        self.time_function_gamma(r)
    }

    /// Light-cone coordinates `x⁰ ± |x⃗|` of `r` in the rest frame of the flat diamond, scaled to unit half-height.
    pub fn light_cone(&self, r: &ChartPoint) -> Result<(f64, f64)> {
        let n = self.model.d;
        let eta = |a: &[f64], b: &[f64]| -a[0] * b[0] + (1..n).map(|i| a[i] * b[i]).sum::<f64>();
        let p = &self.p.coords;
        let q = &self.q.coords;
        let axis: Vec<f64> = (0..n).map(|i| 0.5 * (q[i] - p[i])).collect();
        let h2 = -eta(&axis, &axis);
        if h2 <= 0.0 {
            return Err(AadsError::Precondition("p and q are not timelike separated".into()));
        }
        let h = h2.sqrt();
        let x: Vec<f64> = (0..n).map(|i| r.coords[i] - 0.5 * (p[i] + q[i])).collect();
        let x0 = -eta(&x, &axis) / h;
        let perp: Vec<f64> = (0..n).map(|i| x[i] - x0 * axis[i] / h).collect();
        let rho = eta(&perp, &perp).max(0.0).sqrt();
        let (zp, zm) = ((x0 + rho) / h, (x0 - rho) / h);
        if !(zp.abs() < 1.0 && zm.abs() < 1.0) {
            return Err(AadsError::OutOfRegion(format!("light-cone coordinates ({zp:.4}, {zm:.4}) outside (−1, 1)")));
        }
        Ok((zp, zm))
    }

    /// Wedge labels of a flat frame on the conformal boundary.
    pub fn flat_wedge(&self) -> Result<WedgeSpec> {
        WedgeSpec::new(minkowski_to_esu(&self.p.coords)?, minkowski_to_esu(&self.q.coords)?)
    }

    /// Image of `r` under the flat modular flow by `s`.
    pub fn flow(&self, r: &ChartPoint, s: f64) -> Result<ChartPoint> {
        if self.model.label != "minkowski" {
            return Err(AadsError::Unsupported("closed-form flow is available for flat frames".into()));
        }
        match wedge_flow(&self.model, &self.flat_wedge()?, &Point::Bulk(r.clone()), s)? {
            Point::Bulk(c) => Ok(c),
            Point::Boundary(_) => unreachable!(),
        }
    }

    /// The vector `T` alone (no derivatives).
    pub fn field(&self, r: &ChartPoint) -> Result<Vec<f64>> {
        let (a, da, b, db) = self.gammas(r)?;
        let g = self.model.source.metric_f64(&r.coords);
        let n = self.model.d;
        let ginv = linalg::inverse_f64(&g, n).ok_or_else(|| AadsError::Singularity("metric not invertible".into()))?;
        let ua = linalg::mat_vec(&ginv, &da);
        let ub = linalg::mat_vec(&ginv, &db);
        let den = a + b + linalg::dot(&da, &ub);
        if den.abs() < 1e-14 {
            return Err(AadsError::Singularity("vanishing normalisation of T".into()));
        }
        Ok((0..n).map(|i| (a * ub[i] - b * ua[i]) / den).collect())
    }

    /// Jacobian `∂_b T^a` (index `[a*n+b]`) by central differences with one Richardson step.
    pub fn field_jacobian(&self, r: &ChartPoint, h: f64) -> Result<Vec<f64>> {
        let n = self.model.d;
        let mut jac = vec![0.0; n * n];
        for b in 0..n {
            let diff = |h: f64| -> Result<Vec<f64>> {
                let mut xp = r.coords.clone();
                let mut xm = r.coords.clone();
                xp[b] += h;
                xm[b] -= h;
                let tp = self.field(&ChartPoint::new(&r.chart_id, &xp))?;
                let tm = self.field(&ChartPoint::new(&r.chart_id, &xm))?;
                Ok((0..n).map(|a| (tp[a] - tm[a]) / (2.0 * h)).collect())
            };
            let d1 = diff(h)?;
            let d2 = diff(0.5 * h)?;
            for a in 0..n {
                jac[a * n + b] = (4.0 * d2[a] - d1[a]) / 3.0;
            }
        }
        Ok(jac)
    }

    /// `T`, `g(T,T)`, `∇·T` and the max-norm of `∇_(a T_b) − (1/d)(∇·T) g_ab`.
    pub fn modular_field(&self, r: &ChartPoint) -> Result<ModularField> {
        let n = self.model.d;
        let t = self.field(r)?;
        let jac = self.field_jacobian(r, 1e-4)?;
        let con = connection_at(&self.model, &r.coords, 1)?;
        // ∇_b T^a
        let mut cov = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                cov[a * n + b] = jac[a * n + b] + (0..n).map(|c| con.gam(a, b, c) * t[c]).sum::<f64>();
            }
        }
        let div: f64 = (0..n).map(|a| cov[a * n + a]).sum();
        let g = &con.g;
        let mut resid: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                // ∇_a T_b = g_bc ∇_a T^c
                let nab: f64 = (0..n).map(|c| g[b * n + c] * cov[c * n + a]).sum();
                let nba: f64 = (0..n).map(|c| g[a * n + c] * cov[c * n + b]).sum();
                resid = resid.max((0.5 * (nab + nba) - div / n as f64 * g[a * n + b]).abs());
            }
        }
        Ok(ModularField { norm: linalg::quad(g, &t, &t), t, div, killing_residual: resid })
    }

    /// Points on the future (`∂I⁻(q)`) or past (`∂I⁺(p)`) horizon at the given
    /// coordinate distances from the tip, along the radial generator of an AdS
    /// wedge frame or the `x¹` generator of a flat frame.
    pub fn horizon_sequence(&self, side: HorizonSide, distances: &[f64]) -> Result<Vec<ChartPoint>> {
        let tip = match side {
            HorizonSide::Future => &self.q,
            HorizonSide::Past => &self.p,
        };
        let s = match side {
            HorizonSide::Future => -1.0,
            HorizonSide::Past => 1.0,
        };
        let id = self.model.chart_id();
        distances
            .iter()
            .map(|&dst| {
                let mut c = tip.coords.clone();
                match id {
                    "minkowski" => {
                        c[0] += s * dst;
                        c[1] += dst;
                    }
                    "ads_closure+closure" => {
                        c[0] += s * 2.0 * (0.5 * dst).atan();
                        c[1] = tip.coords[1] + dst;
                    }
                    other => return Err(AadsError::Unsupported(format!("no horizon generator for chart {other}"))),
                }
                Ok(ChartPoint::new(id, &c))
            })
            .collect()
    }

    /// Surface gravity along a sequence of horizon points approaching the tip.
    pub fn surface_gravity(&self, points: &[ChartPoint], side: HorizonSide) -> Result<SurfaceGravity> {
        let tip = match side {
            HorizonSide::Future => &self.q,
            HorizonSide::Past => &self.p,
        };
        let n = self.model.d;
        let mut out = SurfaceGravity { distance: vec![], kappa: vec![], div: vec![], kappa_limit: 0.0, kappa_error: 0.0, div_limit: 0.0, div_error: 0.0 };
        for r in points {
            let (a, _, b, _) = self.gammas(r)?;
            let on = match side {
                HorizonSide::Future => b,
                HorizonSide::Past => a,
            };
            if on.abs() > 1e-7 {
                return Err(AadsError::OffHorizon(format!("world function to the tip is {on:.3e}, not 0")));
            }
            let t = self.field(r)?;
            let jac = self.field_jacobian(r, 1e-4)?;
            let con = connection_at(&self.model, &r.coords, 1)?;
            let acc: Vec<f64> = (0..n)
                .map(|a| {
                    (0..n).map(|b| t[b] * jac[a * n + b]).sum::<f64>()
                        + (0..n).map(|b| (0..n).map(|c| con.gam(a, b, c) * t[b] * t[c]).sum::<f64>()).sum::<f64>()
                })
                .collect();
            let i = (0..n).max_by(|&i, &j| t[i].abs().partial_cmp(&t[j].abs()).unwrap()).unwrap();
            let div: f64 = (0..n).map(|a| jac[a * n + a] + (0..n).map(|c| con.gam(a, a, c) * t[c]).sum::<f64>()).sum();
            let dist = linalg::norm(&r.coords.iter().zip(&tip.coords).map(|(x, y)| x - y).collect::<Vec<_>>());
            out.distance.push(dist);
            out.kappa.push(acc[i] / t[i]);
            out.div.push(div);
        }
        if out.kappa.len() >= 2 {
            let ratio = out.distance[0] / out.distance[1];
            let (k, ke) = richardson(&out.kappa, ratio, 1);
            let (dv, de) = richardson(&out.div, ratio, 1);
            out.kappa_limit = k;
            out.kappa_error = ke;
            out.div_limit = dv;
            out.div_error = de;
        } else if let (Some(&k), Some(&dv)) = (out.kappa.first(), out.div.first()) {
            out.kappa_limit = k;
            out.div_limit = dv;
            out.kappa_error = f64::INFINITY;
            out.div_error = f64::INFINITY;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonSide {
    Past,
    Future,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SurfaceGravity {
    pub distance: Vec<f64>,
    pub kappa: Vec<f64>,
    pub div: Vec<f64>,
    pub kappa_limit: f64,
    pub kappa_error: f64,
    pub div_limit: f64,
    pub div_error: f64,
}

impl SurfaceGravity {
    /// CSV with columns distance_to_tip, kappa, div_T.
    pub fn csv(&self) -> String {
        let rows: Vec<Vec<f64>> = (0..self.kappa.len()).map(|i| vec![self.distance[i], self.kappa[i], self.div[i]]).collect();
        crate::io::csv(&["distance_to_tip", "kappa", "div_T"], &rows)
    }
}

/// Default approach distances for tip extrapolation.
pub const APPROACH: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

/// Standard equatorial AdS wedge with apex separation `dt` on the generator through `(0,…,0,1,0)`.
pub fn standard_ads_wedge(d: usize, dt: f64) -> Result<ModularFrame> {
    let mut e = vec![0.0; d - 1];
    e[d - 3] = 1.0;
    ModularFrame::ads_wedge(d, 1.0, &BoundaryPoint::new(0.0, &e)?, &BoundaryPoint::new(dt, &e)?)
}
