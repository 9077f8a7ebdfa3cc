//! Concrete models, chart transitions and boundary causal order.
//!
//! Global time `t` is an angle: `g_tt = -R²(1 + r²/R²)`, so a radial light ray
//! crosses from the centre to infinity in `Δt = π/2` for every `R`.
//! Boundary points live on the covering cylinder `ℝ × S^{d-2}`.

use crate::error::{AadsError, Result};
use crate::numerics;
use crate::scalar::{Jet, JetSpace, Scalar};
use crate::tensor_core::{ChartPoint, MetricSource, SpacetimeModel};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Width of the excluded band around spherical-coordinate poles.
pub const POLE_BAND: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub tau: f64,
    pub e: Vec<f64>,
}

impl BoundaryPoint {
    /// Normalizes `e`; rejects vectors that are far from unit length.
    pub fn new(tau: f64, e: &[f64]) -> Result<Self> {
        let n = crate::linalg::norm(e);
        if !(n.is_finite() && (n - 1.0).abs() < 1e-6) {
            return Err(AadsError::Precondition(format!("|e| = {n} is not 1")));
        }
        Ok(BoundaryPoint { tau, e: e.iter().map(|x| x / n).collect() })
    }

    /// Boundary dimension plus one, i.e. the bulk `d` this point belongs to.
    pub fn bulk_dim(&self) -> usize {
        self.e.len() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    AdsGlobal,
    AdsPoincare,
    AdsClosure,
    EsuBoundary,
    SchwarzschildAds,
    FgMetric,
    Minkowski,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    pub d: usize,
    #[serde(rename = "R", default = "one")]
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Optional chart choice: `global_cartesian` for ads_global; `closure` or `fg` for schwarzschild_ads.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<crate::fefferman_graham::FGCoefficientTable>,
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn new(family: Family, d: usize, r: f64) -> Self {
        ModelSpec { family, d, r, m: None, chart: None, table: None }
    }
    pub fn with_mass(mut self, m: f64) -> Self {
        self.m = Some(m);
        self
    }
    pub fn with_chart(mut self, chart: &str) -> Self {
        self.chart = Some(chart.to_string());
        self
    }
}

/// A chart metric written once over generic scalars.
pub trait ChartMetric: Send + Sync {
    fn dim(&self) -> usize;
    fn id(&self) -> &str;
    fn domain(&self, x: &[f64]) -> Result<()>;
    fn closure_domain(&self, x: &[f64]) -> Result<()> {
        self.domain(x)
    }
    fn metric<S: Scalar>(&self, x: &[S]) -> Vec<S>;
    fn z<S: Scalar>(&self, _x: &[S]) -> Option<S> {
        None
    }
    /// `z² g` written out, when the product form is singular on the boundary face.
    fn closure_metric<S: Scalar>(&self, _x: &[S]) -> Option<Vec<S>> {
        None
    }
    fn boundary_coordinate(&self) -> Option<usize> {
        None
    }
}

impl<T: ChartMetric> MetricSource for T {
    fn dim(&self) -> usize {
        ChartMetric::dim(self)
    }
    fn chart_id(&self) -> &str {
        self.id()
    }
    fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(AadsError::Domain("non-finite coordinate".into()));
        }
        self.domain(x)
    }
    fn check_closure_domain(&self, x: &[f64]) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(AadsError::Domain("non-finite coordinate".into()));
        }
        self.closure_domain(x)
    }
    fn metric_f64(&self, x: &[f64]) -> Vec<f64> {
        self.metric::<f64>(x)
    }
    fn metric_jet(&self, x: &[Jet]) -> Vec<Jet> {
        self.metric::<Jet>(x)
    }
    fn conformal_factor_f64(&self, x: &[f64]) -> Option<f64> {
        self.z::<f64>(x)
    }
    fn conformal_factor_jet(&self, x: &[Jet]) -> Option<Jet> {
        self.z::<Jet>(x)
    }
    fn closure_metric_f64(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.closure_metric::<f64>(x)
    }
    fn closure_metric_jet(&self, x: &[Jet]) -> Option<Vec<Jet>> {
        self.closure_metric::<Jet>(x)
    }
    fn boundary_coordinate(&self) -> Option<usize> {
        ChartMetric::boundary_coordinate(self)
    }
}

fn zeros<S: Scalar>(n: usize) -> Vec<S> {
    vec![S::from(0.0); n * n]
}

/// Unit vector in ℝ^{k+1} from k hyperspherical angles (polar angles first, azimuth last).
pub fn sphere_embed<S: Scalar>(angles: &[S]) -> Vec<S> {
    let k = angles.len();
    let mut out = Vec::with_capacity(k + 1);
    let mut prod = S::from(1.0);
    for (i, a) in angles.iter().enumerate() {
        if i + 1 == k {
            out.push(prod.clone() * a.cos());
            out.push(prod.clone() * a.sin());
        } else {
            out.push(prod.clone() * a.cos());
            prod = prod * a.sin();
        }
    }
    if k == 0 {
        out.push(S::from(1.0));
    }
    out
}

/// Inverse of [`sphere_embed`]; the azimuth lies in (−π, π].
pub fn sphere_angles(e: &[f64]) -> Vec<f64> {
    let k = e.len() - 1;
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        if i + 1 == k {
            out.push(e[k].atan2(e[k - 1]));
        } else {
            let tail: f64 = e[i + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            out.push(tail.atan2(e[i]));
        }
    }
    out
}

/// Diagonal of the round metric in hyperspherical angles.
pub fn round_metric_diag<S: Scalar>(angles: &[S]) -> Vec<S> {
    let mut out = Vec::with_capacity(angles.len());
    let mut prod = S::from(1.0);
    for (i, a) in angles.iter().enumerate() {
        out.push(prod.clone());
        if i + 1 < angles.len() {
            prod = prod * a.sin().sq();
        }
    }
    out
}

pub(crate) fn check_angles(angles: &[f64], offset: usize) -> Result<()> {
    let k = angles.len();
    for (i, &a) in angles.iter().enumerate().take(k.saturating_sub(1)) {
        if !(a > POLE_BAND && a < PI - POLE_BAND) {
            return Err(AadsError::Domain(format!(
                "coordinate {} = {a} outside ({POLE_BAND}, π − {POLE_BAND}) (pole band)",
                offset + i
            )));
        }
    }
    Ok(())
}

fn put_sphere<S: Scalar>(g: &mut [S], n: usize, offset: usize, factor: &S, angles: &[S]) {
    for (i, w) in round_metric_diag(angles).into_iter().enumerate() {
        let k = offset + i;
        g[k * n + k] = factor.clone() * w;
    }
}

pub struct Minkowski {
    pub d: usize,
}

impl ChartMetric for Minkowski {
    fn dim(&self) -> usize {
        self.d
    }
    fn id(&self) -> &str {
        "minkowski"
    }
    fn domain(&self, _x: &[f64]) -> Result<()> {
        Ok(())
    }
    fn metric<S: Scalar>(&self, _x: &[S]) -> Vec<S> {
        let n = self.d;
        let mut g = zeros(n);
        g[0] = S::from(-1.0);
        for i in 1..n {
            g[i * n + i] = S::from(1.0);
        }
        g
    }
}

/// (t, r, angles) with t an angle.
pub struct AdsGlobal {
    pub d: usize,
    pub r: f64,
}

impl ChartMetric for AdsGlobal {
    fn dim(&self) -> usize {
        self.d
    }
    fn id(&self) -> &str {
        "ads_global"
    }
    fn domain(&self, x: &[f64]) -> Result<()> {
        if x[1] <= 0.0 {
            return Err(AadsError::Domain(format!("r = {} must be > 0", x[1])));
        }
        check_angles(&x[2..], 2)
    }
    fn metric<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.d;
        let r2 = self.r * self.r;
        let rr = x[1].clone();
        let f = rr.sq() / r2 + 1.0;
        let mut g = zeros(n);
        g[0] = f.clone() * (-r2);
        g[n + 1] = f.recip();
        put_sphere(&mut g, n, 2, &rr.sq(), &x[2..]);
        g
    }
    fn z<S: Scalar>(&self, x: &[S]) -> Option<S> {
        let s = x[1].clone() / self.r;
        Some(((s.sq() + 1.0).sqrt() - s) * 2.0)
    }
}

/// (t, x⃗) with r = |x⃗|; smooth through the centre.
pub struct AdsGlobalCartesian {
    pub d: usize,
    pub r: f64,
}

impl ChartMetric for AdsGlobalCartesian {
    fn dim(&self) -> usize {
        self.d
    }
    fn id(&self) -> &str {
        "ads_global_cartesian"
    }
    fn domain(&self, _x: &[f64]) -> Result<()> {
        Ok(())
    }
    fn metric<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.d;
        let r2 = self.r * self.r;
        let mut rho2 = S::from(0.0);
        for xi in &x[1..] {
            rho2 = rho2 + xi.sq();
        }
        let big = rho2 + r2;
        let inv = big.recip();
        let mut g = zeros(n);
        g[0] = -big;
        for i in 1..n {
            for j in 1..n {
                let mut v = -(x[i].clone() * x[j].clone() * inv.clone());
                if i == j {
                    v = v + 1.0;
                }
                g[i * n + j] = v;
            }
        }
        g
    }
}

/// (x⁰, …, x^{d−2}, z) with g = R²/z² (η + dz²).
pub struct AdsPoincare {
    pub d: usize,
    pub r: f64,
}

impl ChartMetric for AdsPoincare {
    fn dim(&self) -> usize {
        self.d
    }
    fn id(&self) -> &str {
        "ads_poincare"
    }
    fn domain(&self, x: &[f64]) -> Result<()> {
        let z = x[self.d - 1];
        if z <= 0.0 {
            return Err(AadsError::Domain(format!("z = {z} must be > 0")));
        }
        Ok(())
    }
    fn closure_domain(&self, _x: &[f64]) -> Result<()> {
        Ok(())
    }
    fn metric<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.d;
        let c = x[n - 1].sq().recip() * (self.r * self.r);
        let mut g = zeros(n);
        g[0] = -c.clone();
        for i in 1..n {
            g[i * n + i] = c.clone();
        }
        g
    }
    fn z<S: Scalar>(&self, x: &[S]) -> Option<S> {
        Some(x[self.d - 1].clone())
    }
    fn closure_metric<S: Scalar>(&self, _x: &[S]) -> Option<Vec<S>> {
        let n = self.d;
        let mut g = zeros(n);
        g[0] = S::from(-self.r * self.r);
        for i in 1..n {
            g[i * n + i] = S::from(self.r * self.r);
        }
        Some(g)
    }
    fn boundary_coordinate(&self) -> Option<usize> {
        Some(self.d - 1)
    }
}

/// (t, u, angles) with r = R(1/u − u/4); the boundary is u = 0, the centre u = 2.
pub struct AdsClosureChart {
    pub d: usize,
    pub r: f64,
}

impl ChartMetric for AdsClosureChart {
    fn dim(&self) -> usize {
        self.d
    }
    fn id(&self) -> &str {
        "ads_closure"
    }
    fn domain(&self, x: &[f64]) -> Result<()> {
        if !(x[1] > 0.0 && x[1] < 2.0) {
            return Err(AadsError::Domain(format!("u = {} outside (0, 2)", x[1])));
        }
        check_angles(&x[2..], 2)
    }
    fn closure_domain(&self, x: &[f64]) -> Result<()> {
        if !(x[1] > -0.5 && x[1] < 2.0) {
            return Err(AadsError::Domain(format!("u = {} outside (−0.5, 2)", x[1])));
        }
        check_angles(&x[2..], 2)
    }
    fn metric<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.d;
        let r2 = self.r * self.r;
        let u = x[1].clone();
        let c = u.sq().recip() * r2;
        let q = u.sq() * 0.25;
        let mut g = zeros(n);
        g[0] = -(c.clone() * (q.clone() + 1.0).sq());
        g[n + 1] = c.clone();
        let sph = c * (-q + 1.0).sq();
        put_sphere(&mut g, n, 2, &sph, &x[2..]);
        g
    }
    fn z<S: Scalar>(&self, x: &[S]) -> Option<S> {
        Some(x[1].clone())
    }
    fn closure_metric<S: Scalar>(&self, x: &[S]) -> Option<Vec<S>> {
        let n = self.d;
        let r2 = self.r * self.r;
        let q = x[1].sq() * 0.25;
        let mut g = zeros(n);
        g[0] = -((q.clone() + 1.0).sq() * r2);
        g[n + 1] = S::from(r2);
        put_sphere(&mut g, n, 2, &((-q + 1.0).sq() * r2), &x[2..]);
        Some(g)
    }
    fn boundary_coordinate(&self) -> Option<usize> {
        Some(1)
    }
}

/// Einstein static universe ℝ × S^{n−1} in (τ, angles).
pub struct Esu {
    pub n: usize,
}

impl ChartMetric for Esu {
    fn dim(&self) -> usize {
        self.n
    }
    fn id(&self) -> &str {
        "esu"
    }
    fn domain(&self, x: &[f64]) -> Result<()> {
        check_angles(&x[1..], 1)
    }
    fn metric<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.n;
        let mut g = zeros(n);
        g[0] = S::from(-1.0);
        put_sphere(&mut g, n, 1, &S::from(1.0), &x[1..]);
        g
    }
}

/// Lapse `f(r) = 1 + r²/R² − 2m/r^{d−3}`.
pub fn schw_lapse(d: usize, r_ads: f64, m: f64, r: f64) -> f64 {
    1.0 + r * r / (r_ads * r_ads) - 2.0 * m / r.powi(d as i32 - 3)
}

/// Outermost root of the lapse (0 when m = 0).
pub fn schw_horizon(d: usize, r_ads: f64, m: f64) -> Result<f64> {
    if m == 0.0 {
        return Ok(0.0);
    }
    if d == 3 {
        let v = 2.0 * m - 1.0;
        return Ok(if v > 0.0 { r_ads * v.sqrt() } else { 0.0 });
    }
    let f = |r: f64| schw_lapse(d, r_ads, m, r);
    let mut hi = 1.0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
    }
    numerics::bisect(f, 1e-300f64.max(1e-12), hi, 1e-15)
}

#[derive(Debug, Clone, Copy)]
pub struct SchwParams {
    pub d: usize,
    pub r: f64,
    pub m: f64,
    /// Smallest admissible areal radius (horizon + 1e−3, or 0 for m = 0).
    pub r_min: f64,
}

impl SchwParams {
    pub fn new(d: usize, r: f64, m: f64) -> Result<Self> {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(AadsError::Construction(format!("mass m = {m} must be ≥ 0")));
        }
        let rh = schw_horizon(d, r, m)?;
        let r_min = if m > 0.0 { rh + 1e-3 } else { 0.0 };
        Ok(SchwParams { d, r, m, r_min })
    }
    pub fn u_of_r(&self, r: f64) -> f64 {
        let s = r / self.r;
        2.0 * ((1.0 + s * s).sqrt() - s)
    }
    pub fn r_of_u(&self, u: f64) -> f64 {
        self.r * (1.0 / u - u / 4.0)
    }
    pub fn u_max(&self) -> f64 {
        if self.r_min > 0.0 {
            self.u_of_r(self.r_min)
        } else {
            2.0
        }
    }
}

/// Schwarzschild-AdS in (t, r, angles), g_tt = −R² f.
pub struct SchwGlobal {
    pub p: SchwParams,
}

impl ChartMetric for SchwGlobal {
    fn dim(&self) -> usize {
        self.p.d
    }
    fn id(&self) -> &str {
        "schw_global"
    }
    fn domain(&self, x: &[f64]) -> Result<()> {
        if !(x[1] > self.p.r_min && x[1] > 0.0) {
            return Err(AadsError::Domain(format!("r = {} must exceed {}", x[1], self.p.r_min)));
        }
        check_angles(&x[2..], 2)
    }
    fn metric<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let SchwParams { d, r, m, .. } = self.p;
        let n = d;
        let rr = x[1].clone();
        let mut f = rr.sq() / (r * r) + 1.0;
        if m != 0.0 {
            f = f - rr.powi(d as i32 - 3).recip() * (2.0 * m);
        }
        let mut g = zeros(n);
        g[0] = f.clone() * (-r * r);
        g[n + 1] = f.recip();
        put_sphere(&mut g, n, 2, &rr.sq(), &x[2..]);
        g
    }
}

/// Schwarzschild-AdS in (t, u, angles) with the same r(u) as the AdS closure chart.
pub struct SchwClosure {
    pub p: SchwParams,
}

impl SchwClosure {
    /// u² f as a function of u.
    fn u2f<S: Scalar>(&self, u: &S) -> S {
        let SchwParams { d, r, m, .. } = self.p;
        let q = u.sq() * 0.25;
        let mut v = (q.clone() + 1.0).sq();
        if m != 0.0 {
            let k = d as i32 - 3;
            v = v - u.powi(d as i32 - 1) * (-q + 1.0).powi(k).recip() * (2.0 * m / r.powi(k));
        }
        v
    }
}

impl ChartMetric for SchwClosure {
    fn dim(&self) -> usize {
        self.p.d
    }
    fn id(&self) -> &str {
        "schw_closure"
    }
    fn domain(&self, x: &[f64]) -> Result<()> {
        let um = self.p.u_max();
        if !(x[1] > 0.0 && x[1] < um) {
            return Err(AadsError::Domain(format!("u = {} outside (0, {um})", x[1])));
        }
        check_angles(&x[2..], 2)
    }
    fn closure_domain(&self, x: &[f64]) -> Result<()> {
        let um = self.p.u_max();
        if !(x[1] > -0.5 && x[1] < um) {
            return Err(AadsError::Domain(format!("u = {} outside (−0.5, {um})", x[1])));
        }
        check_angles(&x[2..], 2)
    }
    fn metric<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.p.d;
        let r2 = self.p.r * self.p.r;
        let u = x[1].clone();
        let inv_u2 = u.sq().recip();
        let uf = self.u2f(&u);
        let q = u.sq() * 0.25;
        let mut g = zeros(n);
        g[0] = -(uf.clone() * r2 * inv_u2.clone());
        g[n + 1] = (q.clone() + 1.0).sq() * r2 / uf * inv_u2.clone();
        let sph = (-q + 1.0).sq() * r2 * inv_u2;
        put_sphere(&mut g, n, 2, &sph, &x[2..]);
        g
    }
    fn z<S: Scalar>(&self, x: &[S]) -> Option<S> {
        Some(x[1].clone())
    }
    fn closure_metric<S: Scalar>(&self, x: &[S]) -> Option<Vec<S>> {
        let n = self.p.d;
        let r2 = self.p.r * self.p.r;
        let uf = self.u2f(&x[1]);
        let q = x[1].sq() * 0.25;
        let mut g = zeros(n);
        g[0] = -(uf.clone() * r2);
        g[n + 1] = (q.clone() + 1.0).sq() * r2 / uf;
        put_sphere(&mut g, n, 2, &((-q + 1.0).sq() * r2), &x[2..]);
        Some(g)
    }
    fn boundary_coordinate(&self) -> Option<usize> {
        Some(1)
    }
}

/// Schwarzschild-AdS (R = 1) in Gaussian normal form: ḡ = dz² − (z² q / w²) dt² + (z²/w²) dΩ²
/// with w = 1/r, q = 1 + w² − 2m w^{d−1} and z = w exp(∫₀^w (q^{−1/2} − 1) ds/s).
pub struct SchwFg {
    pub p: SchwParams,
    w_max: f64,
    z_max: f64,
}

impl SchwFg {
    pub fn new(p: SchwParams) -> Result<Self> {
        if (p.r - 1.0).abs() > 1e-15 {
            return Err(AadsError::Construction("the fg chart is defined for R = 1 only".into()));
        }
        let w_max = if p.r_min > 0.0 { 1.0 / p.r_min } else { 50.0 };
        let mut s = SchwFg { p, w_max, z_max: 0.0 };
        s.z_max = s.z_of_w(w_max);
        Ok(s)
    }

    fn q(&self, w: f64) -> f64 {
        1.0 + w * w - 2.0 * self.p.m * w.powi(self.p.d as i32 - 1)
    }

    fn integral(&self, w: f64) -> f64 {
        numerics::integrate(|s| if s == 0.0 { 0.0 } else { (1.0 / self.q(s).sqrt() - 1.0) / s }, 0.0, w, 8, 20)
    }

    pub fn z_of_w(&self, w: f64) -> f64 {
        w * self.integral(w).exp()
    }

    pub fn w_of_z(&self, z: f64) -> f64 {
        let mut w = z;
        for _ in 0..60 {
            let i = self.integral(w);
            let f = w * i.exp() - z;
            let df = i.exp() / self.q(w).sqrt();
            let step = f / df;
            let mut next = w - step;
            if next <= 0.0 {
                next = 0.5 * w;
            }
            if next > self.w_max * 1.5 {
                next = 0.5 * (w + self.w_max * 1.5);
            }
            let done = (next - w).abs() < 1e-15 * (1.0 + w);
            w = next;
            if done {
                break;
            }
        }
        w
    }

    /// Taylor coefficients of w(z) about z0 up to `k` (from dw/dz = w √q(w) / z).
    fn w_taylor(&self, z0: f64, k: usize) -> Vec<f64> {
        let w0 = self.w_of_z(z0);
        if k == 0 {
            return vec![w0];
        }
        let sp = JetSpace::shared(1, k);
        let s = Jet::variable(&sp, 0, 0.0);
        let dm = self.p.d as i32 - 1;
        let mut w = Jet::from_coeffs(&sp, {
            let mut c = vec![0.0; k + 1];
            c[0] = w0;
            c
        });
        for _ in 0..=k {
            let q = w.sq() + 1.0 - w.powi(dm) * (2.0 * self.p.m);
            let rhs = w.clone() * q.sqrt() / (s.clone() + z0);
            let c = rhs.coeffs().map(|c| c.to_vec()).unwrap_or_else(|| vec![0.0; k + 1]);
            let mut nc = vec![0.0; k + 1];
            nc[0] = w0;
            for i in 0..k {
                nc[i + 1] = c[i] / (i as f64 + 1.0);
            }
            w = Jet::from_coeffs(&sp, nc);
        }
        w.coeffs().unwrap().to_vec()
    }
}

impl ChartMetric for SchwFg {
    fn dim(&self) -> usize {
        self.p.d
    }
    fn id(&self) -> &str {
        "schw_fg"
    }
    fn domain(&self, x: &[f64]) -> Result<()> {
        if !(x[1] > 0.0 && x[1] < self.z_max) {
            return Err(AadsError::Domain(format!("z = {} outside (0, {})", x[1], self.z_max)));
        }
        check_angles(&x[2..], 2)
    }
    fn metric<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.p.d;
        let z = x[1].clone();
        let w = z.compose(&self.w_taylor(z.value(), z.degree()));
        let q = w.sq() + 1.0 - w.powi(n as i32 - 1) * (2.0 * self.p.m);
        let inv_w2 = w.sq().recip();
        let mut g = zeros(n);
        g[0] = -(q * inv_w2.clone());
        g[n + 1] = z.sq().recip();
        put_sphere(&mut g, n, 2, &inv_w2, &x[2..]);
        g
    }
    fn z<S: Scalar>(&self, x: &[S]) -> Option<S> {
        Some(x[1].clone())
    }
    fn boundary_coordinate(&self) -> Option<usize> {
        Some(1)
    }
}

fn check_common(spec: &ModelSpec) -> Result<()> {
    let min_d = if spec.family == Family::Minkowski { 2 } else { 3 };
    if spec.d < min_d {
        return Err(AadsError::Construction(format!("d = {} is below {min_d}", spec.d)));
    }
    if !(spec.r > 0.0 && spec.r.is_finite()) {
        return Err(AadsError::Construction(format!("R = {} must be positive", spec.r)));
    }
    if spec.m.is_some() && spec.family != Family::SchwarzschildAds {
        return Err(AadsError::Construction("mass is only meaningful for schwarzschild_ads".into()));
    }
    Ok(())
}

pub fn build_model(spec: &ModelSpec) -> Result<SpacetimeModel> {
    check_common(spec)?;
    let (d, r) = (spec.d, spec.r);
    let chart = spec.chart.as_deref();
    let bad_chart = |c: &str| AadsError::Construction(format!("chart {c} not available for {:?}", spec.family));
    let src: Arc<dyn MetricSource> = match spec.family {
        Family::Minkowski => Arc::new(Minkowski { d }),
        Family::AdsGlobal => match chart {
            None | Some("global") => Arc::new(AdsGlobal { d, r }),
            Some("global_cartesian") => Arc::new(AdsGlobalCartesian { d, r }),
            Some(c) => return Err(bad_chart(c)),
        },
        Family::AdsPoincare => Arc::new(AdsPoincare { d, r }),
        Family::AdsClosure => Arc::new(AdsClosureChart { d, r }),
        Family::EsuBoundary => Arc::new(Esu { n: d - 1 }),
        Family::SchwarzschildAds => {
            let p = SchwParams::new(d, r, spec.m.unwrap_or(0.0))?;
            match chart {
                None | Some("global") => Arc::new(SchwGlobal { p }),
                Some("closure") => Arc::new(SchwClosure { p }),
                Some("fg") => Arc::new(SchwFg::new(p)?),
                Some(c) => return Err(bad_chart(c)),
            }
        }
        Family::FgMetric => {
            let table = spec
                .table
                .as_ref()
                .ok_or_else(|| AadsError::Construction("fg_metric requires a coefficient table".into()))?;
            if table.d != d {
                return Err(AadsError::Construction(format!("table d = {} but spec d = {d}", table.d)));
            }
            Arc::new(crate::fefferman_graham::FgMetricChart::new(table)?)
        }
    };
    let label = match spec.family {
        Family::Minkowski => "minkowski",
        Family::AdsGlobal | Family::AdsPoincare | Family::AdsClosure => "ads",
        Family::EsuBoundary => "esu",
        Family::SchwarzschildAds => "schwarzschild_ads",
        Family::FgMetric => "fg_metric",
    };
    Ok(SpacetimeModel::new(label, r, src))
}

/// Embedding coordinates X ∈ ℝ^{2,d−1} (X⁰, X¹…X^{d−1}, X^d) of global (t, x⃗).
fn embed(t: f64, x: &[f64], r: f64) -> Vec<f64> {
    let rho2: f64 = x.iter().map(|v| v * v).sum();
    let a = (r * r + rho2).sqrt();
    let mut out = Vec::with_capacity(x.len() + 2);
    out.push(a * t.sin());
    out.extend_from_slice(x);
    out.push(a * t.cos());
    out
}

/// Covering-time representation (t, x⃗) of a bulk AdS point.
fn to_hub(p: &ChartPoint, r: f64) -> Result<(f64, Vec<f64>)> {
    let c = &p.coords;
    match p.chart_id.as_str() {
        "ads_global" | "ads_closure" => {
            let rad = if p.chart_id == "ads_global" {
                c[1]
            } else {
                if !(c[1] > 0.0 && c[1] <= 2.0) {
                    return Err(AadsError::Domain(format!("u = {} outside (0, 2]", c[1])));
                }
                r * (1.0 / c[1] - c[1] / 4.0)
            };
            if rad < 0.0 {
                return Err(AadsError::Domain(format!("r = {rad} must be ≥ 0")));
            }
            let e = sphere_embed(&c[2..]);
            Ok((c[0], e.iter().map(|v| v * rad).collect()))
        }
        "ads_global_cartesian" => Ok((c[0], c[1..].to_vec())),
        "ads_poincare" => {
            let n = c.len();
            let z = c[n - 1];
            if z <= 0.0 {
                return Err(AadsError::Domain(format!("z = {z} must be > 0")));
            }
            let x = &c[..n - 1];
            let eta = -x[0] * x[0] + x[1..].iter().map(|v| v * v).sum::<f64>();
            let a = r / z;
            let b = r * z + r * eta / z;
            let mut xs: Vec<f64> = x[1..].iter().map(|v| r * v / z).collect();
            xs.push(0.5 * (a - b));
            let x0 = r * x[0] / z;
            let xd = 0.5 * (a + b);
            Ok((x0.atan2(xd), xs))
        }
        "embedding" => {
            let n = c.len();
            Ok((c[0].atan2(c[n - 1]), c[1..n - 1].to_vec()))
        }
        other => Err(AadsError::Coverage(format!("chart {other} is not an AdS chart"))),
    }
}

fn from_hub(t: f64, x: &[f64], to: &str, r: f64) -> Result<ChartPoint> {
    let rho = crate::linalg::norm(x);
    let coords = match to {
        "ads_global_cartesian" => {
            let mut v = vec![t];
            v.extend_from_slice(x);
            v
        }
        "ads_global" | "ads_closure" => {
            if rho == 0.0 {
                return Err(AadsError::Coverage("the centre r = 0 is not covered by polar charts".into()));
            }
            let e: Vec<f64> = x.iter().map(|v| v / rho).collect();
            let ang = sphere_angles(&e);
            check_angles(&ang, 2).map_err(|e| AadsError::Coverage(e.to_string()))?;
            let radial = if to == "ads_global" {
                rho
            } else {
                let s = rho / r;
                2.0 * ((1.0 + s * s).sqrt() - s)
            };
            let mut v = vec![t, radial];
            v.extend(ang);
            v
        }
        "ads_poincare" => {
            let xx = embed(t, x, r);
            let n = xx.len();
            let a = xx[n - 2] + xx[n - 1];
            if a <= 0.0 || t.abs() >= PI {
                return Err(AadsError::Coverage(format!(
                    "X^(d-1) + X^d = {a:.3e} ≤ 0 or |t| ≥ π: outside the Poincaré patch"
                )));
            }
            let z = r / a;
            let mut v: Vec<f64> = xx[..n - 2].iter().map(|xi| z * xi / r).collect();
            v.push(z);
            v
        }
        "embedding" => embed(t, x, r),
        other => return Err(AadsError::Coverage(format!("unknown target chart {other}"))),
    };
    Ok(ChartPoint::new(to, &coords))
}

/// Coordinates of the same AdS event in another chart. `r` is the AdS radius.
pub fn transition(p: &ChartPoint, to_chart: &str, r: f64) -> Result<ChartPoint> {
    if p.chart_id == to_chart {
        return Ok(p.clone());
    }
    let (t, x) = to_hub(p, r)?;
    from_hub(t, &x, to_chart, r)
}

/// Transition between Schwarzschild-AdS charts (global r, closure u, fg z).
pub fn schw_transition(p: &ChartPoint, to_chart: &str, params: &SchwParams) -> Result<ChartPoint> {
    let c = &p.coords;
    let fg = || SchwFg::new(*params);
    let r = match p.chart_id.as_str() {
        "schw_global" => c[1],
        "schw_closure" => params.r_of_u(c[1]),
        "schw_fg" => 1.0 / fg()?.w_of_z(c[1]),
        other => return Err(AadsError::Coverage(format!("chart {other} is not a Schwarzschild-AdS chart"))),
    };
    if r <= params.r_min {
        return Err(AadsError::Coverage(format!("r = {r} inside the excluded horizon region")));
    }
    let radial = match to_chart {
        "schw_global" => r,
        "schw_closure" => params.u_of_r(r),
        "schw_fg" => fg()?.z_of_w(1.0 / r),
        other => return Err(AadsError::Coverage(format!("unknown target chart {other}"))),
    };
    let mut v = c.clone();
    v[1] = radial;
    Ok(ChartPoint::new(to_chart, &v))
}

/// Boundary point reached at u → 0 (closure charts) or z → 0 (Poincaré).
pub fn boundary_point_of(chart_id: &str, coords: &[f64]) -> Result<BoundaryPoint> {
    match chart_id {
        "ads_closure" | "ads_closure+closure" | "schw_closure" | "schw_closure+closure" | "schw_fg"
        | "schw_fg+closure" => {
            let e = sphere_embed(&coords[2..]);
            BoundaryPoint::new(coords[0], &e)
        }
        "ads_poincare" | "ads_poincare+closure" => minkowski_to_esu(&coords[..coords.len() - 1]),
        other => Err(AadsError::Coverage(format!("chart {other} has no boundary face"))),
    }
}

/// Projective embedding of ℝ^{1,n−1} into ESU_n: x⁰ = sin τ/(cos τ + e_n), xᵢ = eᵢ/(cos τ + e_n).
pub fn minkowski_to_esu(x: &[f64]) -> Result<BoundaryPoint> {
    let eta = -x[0] * x[0] + x[1..].iter().map(|v| v * v).sum::<f64>();
    let tau = x[0].atan2(0.5 * (1.0 + eta));
    let mut e: Vec<f64> = x[1..].to_vec();
    e.push(0.5 * (1.0 - eta));
    let n = crate::linalg::norm(&e);
    BoundaryPoint::new(tau, &e.iter().map(|v| v / n).collect::<Vec<_>>())
}

/// Inverse of [`minkowski_to_esu`]; fails outside the Minkowski domain around τ = 0, e = e_n.
pub fn esu_to_minkowski(b: &BoundaryPoint) -> Result<Vec<f64>> {
    let k = b.e.len();
    let den = b.tau.cos() + b.e[k - 1];
    if den <= 1e-14 || b.tau.abs() >= PI {
        return Err(AadsError::Coverage(format!("τ = {}, e = {:?} outside the Minkowski domain", b.tau, b.e)));
    }
    let mut x = vec![b.tau.sin() / den];
    x.extend(b.e[..k - 1].iter().map(|v| v / den));
    Ok(x)
}

/// Antipodal point on the covering cylinder.
pub fn antipodal(p: &BoundaryPoint) -> BoundaryPoint {
    BoundaryPoint { tau: p.tau + PI, e: p.e.iter().map(|v| -v).collect() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chronology {
    ChronologicalFuture,
    ChronologicalPast,
    Lightlike,
    Spacelike,
}

/// Spherical geodesic distance between unit vectors.
pub fn sphere_distance(a: &[f64], b: &[f64]) -> f64 {
    // atan2 form is accurate for both nearly equal and nearly antipodal vectors.
    let dot = crate::linalg::dot(a, b);
    let cross2: f64 = {
        let na = crate::linalg::dot(a, a);
        let nb = crate::linalg::dot(b, b);
        (na * nb - dot * dot).max(0.0)
    };
    cross2.sqrt().atan2(dot)
}

/// Causal order on the covering of ESU: compare Δτ with the spherical distance.
pub fn boundary_chronology(p: &BoundaryPoint, q: &BoundaryPoint) -> Chronology {
    let dt = q.tau - p.tau;
    let dist = sphere_distance(&p.e, &q.e);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_core::{christoffel_at, curvature_at, metric_at};

    #[test]
    fn explicit_closure_metrics_match_rescaling() {
        let specs = [
            ModelSpec::new(Family::AdsClosure, 4, 1.3),
            ModelSpec::new(Family::AdsPoincare, 4, 0.7),
            ModelSpec::new(Family::SchwarzschildAds, 4, 1.0).with_mass(0.05).with_chart("closure"),
        ];
        for spec in specs {
            let m = build_model(&spec).unwrap();
            let x = if m.chart_id() == "ads_poincare" { vec![0.3, 0.1, -0.2, 0.4] } else { vec![0.3, 0.4, 1.1, 0.5] };
            let z = m.conformal_factor(&x).unwrap();
            let bare: Vec<f64> = m.source.metric_f64(&x).iter().map(|g| g * z * z).collect();
            let closed = m.closure().unwrap().source.metric_f64(&x);
            for (a, b) in bare.iter().zip(&closed) {
                assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()), "{}: {a} vs {b}", m.chart_id());
            }
        }
    }

    #[test]
    fn global_metric_matches_closed_form() {
        let m = build_model(&ModelSpec::new(Family::AdsGlobal, 4, 1.0)).unwrap();
        let g = metric_at(&m, &m.point(&[0.0, 1.0, PI / 2.0, 0.0])).unwrap();
        let want = [-2.0, 0.5, 1.0, 1.0];
        for i in 0..4 {
            assert!((g[i * 4 + i] - want[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn poincare_time_component() {
        let m = build_model(&ModelSpec::new(Family::AdsPoincare, 4, 1.0)).unwrap();
        let g = metric_at(&m, &m.point(&[0.3, 0.1, -0.2, 2.0])).unwrap();
        assert!((g[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn poincare_christoffels() {
        let m = build_model(&ModelSpec::new(Family::AdsPoincare, 4, 1.0)).unwrap();
        let gam = christoffel_at(&m, &m.point(&[0.0, 0.0, 0.0, 1.0])).unwrap();
        let idx = |a: usize, b: usize, c: usize| (a * 4 + b) * 4 + c;
        assert!((gam[idx(3, 0, 0)] + 1.0).abs() < 1e-12);
        assert!((gam[idx(0, 0, 3)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pole_band_is_a_domain_error() {
        let m = build_model(&ModelSpec::new(Family::AdsGlobal, 4, 1.0)).unwrap();
        let err = metric_at(&m, &m.point(&[0.0, 1.0, 1e-8, 0.0])).unwrap_err();
        assert!(matches!(err, AadsError::Domain(_)));
    }

    #[test]
    fn centre_maps_to_embedding_axis() {
        let p = ChartPoint::new("ads_global_cartesian", &[0.0, 0.0, 0.0, 0.0]);
        let x = transition(&p, "embedding", 2.0).unwrap();
        assert_eq!(x.coords, vec![0.0, 0.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn closure_u_is_decreasing_in_r() {
        let mut last = 2.0;
        for k in 1..50 {
            let r = 0.1 * k as f64;
            let p = ChartPoint::new("ads_global", &[0.0, r, 1.0, 0.5]);
            let u = transition(&p, "ads_closure", 1.0).unwrap().coords[1];
            assert!(u < last);
            last = u;
        }
        let p = ChartPoint::new("ads_global", &[0.0, 1e8, 1.0, 0.5]);
        assert!(transition(&p, "ads_closure", 1.0).unwrap().coords[1] < 1e-7);
    }

    #[test]
    fn poincare_coverage_error() {
        let p = ChartPoint::new("ads_global_cartesian", &[3.0, 0.0, 0.0, 0.0]);
        assert!(matches!(transition(&p, "ads_poincare", 1.0), Err(AadsError::Coverage(_))));
    }

    #[test]
    fn schwarzschild_mass_zero_is_ads() {
        let a = build_model(&ModelSpec::new(Family::AdsGlobal, 4, 1.3)).unwrap();
        let s = build_model(&ModelSpec::new(Family::SchwarzschildAds, 4, 1.3).with_mass(0.0)).unwrap();
        let p = a.point(&[0.2, 0.7, 1.1, 2.0]);
        let ga = metric_at(&a, &p).unwrap();
        let gs = metric_at(&s, &s.point(&p.coords)).unwrap();
        for k in 0..16 {
            assert!((ga[k] - gs[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn fg_chart_is_vacuum() {
        let s = build_model(&ModelSpec::new(Family::SchwarzschildAds, 4, 1.0).with_mass(0.1).with_chart("fg"))
            .unwrap();
        let cb = curvature_at(&s, &s.point(&[0.1, 0.3, 1.2, 0.4])).unwrap();
        for k in 0..16 {
            assert!((cb.ricci[k] + 3.0 * cb.g[k]).abs() < 1e-9, "{k}: {}", cb.ricci[k] + 3.0 * cb.g[k]);
        }
    }

    #[test]
    fn schw_charts_round_trip() {
        let p = SchwParams::new(4, 1.0, 0.1).unwrap();
        let a = ChartPoint::new("schw_global", &[0.3, 2.5, 1.0, 0.2]);
        for to in ["schw_closure", "schw_fg"] {
            let b = schw_transition(&a, to, &p).unwrap();
            let c = schw_transition(&b, "schw_global", &p).unwrap();
            assert!((c.coords[1] - 2.5).abs() < 1e-10);
        }
    }

    #[test]
    fn chronology_examples() {
        let e = vec![1.0, 0.0, 0.0];
        let p = BoundaryPoint::new(0.0, &e).unwrap();
        let q = BoundaryPoint::new(1.0, &e).unwrap();
        assert_eq!(boundary_chronology(&p, &q), Chronology::ChronologicalFuture);
        let anti = antipodal(&p);
        assert_eq!(boundary_chronology(&p, &anti), Chronology::Lightlike);
        let r = BoundaryPoint::new(0.5, &[-1.0, 0.0, 0.0]).unwrap();
        assert_eq!(boundary_chronology(&p, &r), Chronology::Spacelike);
    }

    #[test]
    fn minkowski_domain_roundtrip() {
        let x = [0.3, -0.4, 0.7];
        let b = minkowski_to_esu(&x).unwrap();
        let y = esu_to_minkowski(&b).unwrap();
        for i in 0..3 {
            assert!((x[i] - y[i]).abs() < 1e-13);
        }
    }
}
