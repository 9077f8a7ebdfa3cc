//! Chart-level metric evaluation and tensor calculus.
//!
//! Conventions: signature (−,+,…,+); `2∇_[a∇_b]X_c = Riem^d_{abc} X_d`.
//! The Riemann array is stored as `riemann[d][c][a][b] = Riem^d_{abc}` so that
//! it is antisymmetric in its last two slots. The lowered form used for
//! sectional curvature and the Weyl tensor is
//! `Rm(X,Y,Z,W) = g(R(X,Y)W, Z)` with `Rm(X,Y,X,Y) > 0` on round spheres.

use crate::error::{AadsError, Result};
use crate::linalg;
use crate::scalar::Jet;
use std::fmt;
use std::sync::Arc;

/// A metric written over generic scalars, evaluated on values or jets.
pub trait MetricSource: Send + Sync {
    fn dim(&self) -> usize;
    fn chart_id(&self) -> &str;
    /// Ok when `x` lies in the chart domain; the error names the violated bound.
    fn check_domain(&self, x: &[f64]) -> Result<()>;
    /// Domain of the conformally rescaled metric, which may include the boundary face.
    fn check_closure_domain(&self, x: &[f64]) -> Result<()> {
        self.check_domain(x)
    }
    fn metric_f64(&self, x: &[f64]) -> Vec<f64>;
    fn metric_jet(&self, x: &[Jet]) -> Vec<Jet>;
    fn conformal_factor_f64(&self, _x: &[f64]) -> Option<f64> {
        None
    }
    fn conformal_factor_jet(&self, _x: &[Jet]) -> Option<Jet> {
        None
    }
    fn closure_metric_f64(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
    fn closure_metric_jet(&self, _x: &[Jet]) -> Option<Vec<Jet>> {
        None
    }
    /// Index of the coordinate that vanishes on the conformal boundary, if any.
    fn boundary_coordinate(&self) -> Option<usize> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    Analytic,
    /// Central differences; `None` uses `h = max(1e-5, 1e-5 |x|)` per coordinate.
    CentralFd(Option<f64>),
}

#[derive(Clone)]
pub struct SpacetimeModel {
    pub d: usize,
    pub ads_radius: f64,
    pub derivative_mode: DerivativeMode,
    pub source: Arc<dyn MetricSource>,
    pub label: String,
}

impl fmt::Debug for SpacetimeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpacetimeModel")
            .field("label", &self.label)
            .field("d", &self.d)
            .field("R", &self.ads_radius)
            .field("chart", &self.chart_id())
            .field("mode", &self.derivative_mode)
            .finish()
    }
}

impl SpacetimeModel {
    pub fn new(label: &str, ads_radius: f64, source: Arc<dyn MetricSource>) -> Self {
        SpacetimeModel {
            d: source.dim(),
            ads_radius,
            derivative_mode: DerivativeMode::Analytic,
            source,
            label: label.to_string(),
        }
    }

    pub fn chart_id(&self) -> &str {
        self.source.chart_id()
    }

    pub fn with_mode(&self, mode: DerivativeMode) -> Self {
        let mut m = self.clone();
        m.derivative_mode = mode;
        m
    }

    pub fn point(&self, coords: &[f64]) -> ChartPoint {
        ChartPoint::new(self.chart_id(), coords)
    }

    pub fn has_conformal_factor(&self) -> bool {
        self.source.conformal_factor_f64(&vec![1.0; self.d]).is_some()
    }

    pub fn conformal_factor(&self, x: &[f64]) -> Option<f64> {
        self.source.conformal_factor_f64(x)
    }

    /// The conformally rescaled metric `z² g` on the same chart.
    pub fn closure(&self) -> Result<SpacetimeModel> {
        if !self.has_conformal_factor() {
            return Err(AadsError::Config(format!("model {} has no conformal factor", self.label)));
        }
        let src = ClosureSource { inner: self.source.clone(), id: format!("{}+closure", self.chart_id()) };
        Ok(SpacetimeModel {
            d: self.d,
            ads_radius: self.ads_radius,
            derivative_mode: self.derivative_mode,
            source: Arc::new(src),
            label: format!("{}-closure", self.label),
        })
    }
}

struct ClosureSource {
    inner: Arc<dyn MetricSource>,
    id: String,
}

impl MetricSource for ClosureSource {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn chart_id(&self) -> &str {
        &self.id
    }
    fn check_domain(&self, x: &[f64]) -> Result<()> {
        self.inner.check_closure_domain(x)
    }
    fn metric_f64(&self, x: &[f64]) -> Vec<f64> {
        if let Some(g) = self.inner.closure_metric_f64(x) {
            return g;
        }
        let z = self.inner.conformal_factor_f64(x).unwrap_or(1.0);
        self.inner.metric_f64(x).into_iter().map(|g| g * z * z).collect()
    }
    fn metric_jet(&self, x: &[Jet]) -> Vec<Jet> {
        if let Some(g) = self.inner.closure_metric_jet(x) {
            return g;
        }
        let z = self.inner.conformal_factor_jet(x).unwrap_or(Jet::Const(1.0));
        let z2 = z.clone() * z;
        self.inner.metric_jet(x).into_iter().map(|g| g * z2.clone()).collect()
    }
    fn conformal_factor_f64(&self, x: &[f64]) -> Option<f64> {
        self.inner.conformal_factor_f64(x)
    }
    fn conformal_factor_jet(&self, x: &[Jet]) -> Option<Jet> {
        self.inner.conformal_factor_jet(x)
    }
    fn boundary_coordinate(&self) -> Option<usize> {
        self.inner.boundary_coordinate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub chart_id: String,
    pub coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(chart_id: &str, coords: &[f64]) -> Self {
        ChartPoint { chart_id: chart_id.to_string(), coords: coords.to_vec() }
    }
}

/// Metric with first and (optionally) second partial derivatives at a point.
#[derive(Debug, Clone)]
pub struct MetricDerivs {
    pub n: usize,
    /// g[a*n+b]
    pub g: Vec<f64>,
    /// dg[(c*n+a)*n+b] = ∂_c g_ab
    pub dg: Vec<f64>,
    /// ddg[((c*n+e)*n+a)*n+b] = ∂_c ∂_e g_ab (empty when only first order requested)
    pub ddg: Vec<f64>,
}

fn fd_step(x: f64, mode: DerivativeMode) -> f64 {
    match mode {
        DerivativeMode::CentralFd(Some(h)) => h,
        _ => (1e-5f64).max(1e-5 * x.abs()),
    }
}

fn check(model: &SpacetimeModel, p: &ChartPoint) -> Result<()> {
    if p.coords.len() != model.d {
        return Err(AadsError::Domain(format!(
            "point has {} coordinates, model dimension is {}",
            p.coords.len(),
            model.d
        )));
    }
    model.source.check_domain(&p.coords)
}

/// g_ab(p) as a row-major d×d matrix.
pub fn metric_at(model: &SpacetimeModel, p: &ChartPoint) -> Result<Vec<f64>> {
    check(model, p)?;
    let g = model.source.metric_f64(&p.coords);
    if cfg!(debug_assertions) {
        let neg = linalg::sym_eigenvalues(&g, model.d).iter().filter(|&&e| e < 0.0).count();
        if neg != 1 {
            return Err(AadsError::Domain(format!(
                "metric at {:?} has {} negative eigenvalues",
                p.coords, neg
            )));
        }
    }
    Ok(g)
}

/// Metric derivatives up to `order` (1 or 2) at `x`.
pub fn metric_derivs(model: &SpacetimeModel, x: &[f64], order: usize) -> Result<MetricDerivs> {
    let n = model.d;
    model.source.check_domain(x)?;
    match model.derivative_mode {
        DerivativeMode::Analytic => {
            let jets = Jet::seed(x, order);
            let gj = model.source.metric_jet(&jets);
            let mut g = vec![0.0; n * n];
            let mut dg = vec![0.0; n * n * n];
            let mut ddg = if order >= 2 { vec![0.0; n * n * n * n] } else { Vec::new() };
            for a in 0..n {
                for b in 0..n {
                    let j = &gj[a * n + b];
                    g[a * n + b] = crate::scalar::Scalar::value(j);
                    for c in 0..n {
                        dg[(c * n + a) * n + b] = j.d1(c);
                        if order >= 2 {
                            for e in 0..n {
                                ddg[((c * n + e) * n + a) * n + b] = j.d2(c, e);
                            }
                        }
                    }
                }
            }
            Ok(MetricDerivs { n, g, dg, ddg })
        }
        mode @ DerivativeMode::CentralFd(_) => {
            let g = model.source.metric_f64(x);
            let first = |y: &[f64]| -> Result<Vec<f64>> {
                let mut dg = vec![0.0; n * n * n];
                for c in 0..n {
                    let h = fd_step(y[c], mode);
                    let mut yp = y.to_vec();
                    let mut ym = y.to_vec();
                    yp[c] += h;
                    ym[c] -= h;
                    model.source.check_domain(&yp).map_err(|e| AadsError::Stencil(e.to_string()))?;
                    model.source.check_domain(&ym).map_err(|e| AadsError::Stencil(e.to_string()))?;
                    let gp = model.source.metric_f64(&yp);
                    let gm = model.source.metric_f64(&ym);
                    for k in 0..n * n {
                        dg[c * n * n + k] = (gp[k] - gm[k]) / (2.0 * h);
                    }
                }
                Ok(dg)
            };
            let dg = first(x)?;
            let mut ddg = Vec::new();
            if order >= 2 {
                ddg = vec![0.0; n * n * n * n];
                for c in 0..n {
                    let h = fd_step(x[c], mode);
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[c] += h;
                    xm[c] -= h;
                    let dp = first(&xp)?;
                    let dm = first(&xm)?;
                    for k in 0..n * n * n {
                        ddg[c * n * n * n + k] = (dp[k] - dm[k]) / (2.0 * h);
                    }
                }
            }
            Ok(MetricDerivs { n, g, dg, ddg })
        }
    }
}

/// Connection data: Γ^a_bc and (when available) ∂_e Γ^a_bc.
#[derive(Debug, Clone)]
pub struct Connection {
    pub n: usize,
    pub g: Vec<f64>,
    pub ginv: Vec<f64>,
    /// gamma[(a*n+b)*n+c] = Γ^a_bc
    pub gamma: Vec<f64>,
    /// dgamma[((e*n+a)*n+b)*n+c] = ∂_e Γ^a_bc
    pub dgamma: Vec<f64>,
}

impl Connection {
    pub fn from_derivs(md: &MetricDerivs) -> Result<Connection> {
        let n = md.n;
        let ginv = linalg::inverse_f64(&md.g, n)
            .ok_or_else(|| AadsError::Domain("degenerate metric".into()))?;
        let dg = |c: usize, a: usize, b: usize| md.dg[(c * n + a) * n + b];
        // Γ_dbc lowered
        let mut low = vec![0.0; n * n * n];
        for d in 0..n {
            for b in 0..n {
                for c in 0..n {
                    low[(d * n + b) * n + c] = 0.5 * (dg(b, d, c) + dg(c, d, b) - dg(d, b, c));
                }
            }
        }
        let mut gamma = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut s = 0.0;
                    for d in 0..n {
                        s += ginv[a * n + d] * low[(d * n + b) * n + c];
                    }
                    gamma[(a * n + b) * n + c] = s;
                }
            }
        }
        let mut dgamma = Vec::new();
        if !md.ddg.is_empty() {
            dgamma = vec![0.0; n * n * n * n];
            let ddg = |c: usize, e: usize, a: usize, b: usize| md.ddg[((c * n + e) * n + a) * n + b];
            for e in 0..n {
                // ∂_e g^{ad} = -g^{am} ∂_e g_mk g^{kd}
                let mut dginv = vec![0.0; n * n];
                for a in 0..n {
                    for d in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            for k in 0..n {
                                s -= ginv[a * n + m] * dg(e, m, k) * ginv[k * n + d];
                            }
                        }
                        dginv[a * n + d] = s;
                    }
                }
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            let mut s = 0.0;
                            for d in 0..n {
                                s += dginv[a * n + d] * low[(d * n + b) * n + c]
                                    + ginv[a * n + d]
                                        * 0.5
                                        * (ddg(e, b, d, c) + ddg(e, c, d, b) - ddg(e, d, b, c));
                            }
                            dgamma[((e * n + a) * n + b) * n + c] = s;
                        }
                    }
                }
            }
        }
        Ok(Connection { n, g: md.g.clone(), ginv, gamma, dgamma })
    }

    #[inline]
    pub fn gam(&self, a: usize, b: usize, c: usize) -> f64 {
        self.gamma[(a * self.n + b) * self.n + c]
    }
    #[inline]
    pub fn dgam(&self, e: usize, a: usize, b: usize, c: usize) -> f64 {
        let n = self.n;
        self.dgamma[((e * n + a) * n + b) * n + c]
    }
}

pub fn connection_at(model: &SpacetimeModel, x: &[f64], order: usize) -> Result<Connection> {
    let md = metric_derivs(model, x, order)?;
    Connection::from_derivs(&md)
}

/// Γ^a_bc at p, flattened as `[(a*d+b)*d+c]`.
pub fn christoffel_at(model: &SpacetimeModel, p: &ChartPoint) -> Result<Vec<f64>> {
    check(model, p)?;
    Ok(connection_at(model, &p.coords, 1)?.gamma)
}

/// Max-norm of ∇_a g_bc computed from the returned Christoffels.
pub fn metric_compatibility_residual(model: &SpacetimeModel, p: &ChartPoint) -> Result<f64> {
    check(model, p)?;
    let md = metric_derivs(model, &p.coords, 1)?;
    let con = Connection::from_derivs(&md)?;
    let n = md.n;
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut r = md.dg[(a * n + b) * n + c];
                for d in 0..n {
                    r -= con.gam(d, a, b) * md.g[d * n + c] + con.gam(d, a, c) * md.g[b * n + d];
                }
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub n: usize,
    /// riemann[((d*n+c)*n+a)*n+b] = Riem^d_{abc}
    pub riemann: Vec<f64>,
    pub ricci: Vec<f64>,
    pub scalar: f64,
    /// weyl[((a*n+b)*n+c)*n+d] = C(X_a,X_b,X_c,X_d) in the sectional-positive lowering
    pub weyl: Vec<f64>,
    /// rm[((a*n+b)*n+c)*n+d] = Rm(X_a,X_b,X_c,X_d)
    pub rm: Vec<f64>,
    pub g: Vec<f64>,
    pub ginv: Vec<f64>,
}

impl CurvatureBundle {
    pub fn from_connection(con: &Connection) -> CurvatureBundle {
        let n = con.n;
        let mut riemann = vec![0.0; n * n * n * n];
        // Riem^d_{abc} = ∂_b Γ^d_ac − ∂_a Γ^d_bc + Γ^e_ac Γ^d_be − Γ^e_bc Γ^d_ae
        for d in 0..n {
            for c in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let mut s = con.dgam(b, d, a, c) - con.dgam(a, d, b, c);
                        for e in 0..n {
                            s += con.gam(e, a, c) * con.gam(d, b, e) - con.gam(e, b, c) * con.gam(d, a, e);
                        }
                        riemann[((d * n + c) * n + a) * n + b] = s;
                    }
                }
            }
        }
        let riem = |d: usize, a: usize, b: usize, c: usize| riemann[((d * n + c) * n + a) * n + b];
        let mut ricci = vec![0.0; n * n];
        for a in 0..n {
            for c in 0..n {
                let mut s = 0.0;
                for b in 0..n {
                    s += riem(b, a, b, c);
                }
                ricci[a * n + c] = s;
            }
        }
        let scalar: f64 = (0..n * n).map(|k| con.ginv[k] * ricci[k]).sum();
        // Rm(X,Y,Z,W) = g(R(X,Y)W, Z), R(X,Y)W^d = -Riem^d_{abc} X^a Y^b W^c
        let g = &con.g;
        let mut rm = vec![0.0; n * n * n * n];
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    for w in 0..n {
                        let mut s = 0.0;
                        for d in 0..n {
                            s -= riem(d, x, y, w) * g[d * n + z];
                        }
                        rm[((x * n + y) * n + z) * n + w] = s;
                    }
                }
            }
        }
        let mut weyl = vec![0.0; n * n * n * n];
        let nf = n as f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let gac = g[a * n + c];
                        let gbd = g[b * n + d];
                        let gad = g[a * n + d];
                        let gbc = g[b * n + c];
                        let mut v = rm[((a * n + b) * n + c) * n + d];
                        if n > 2 {
                            v -= (gac * ricci[b * n + d] - gad * ricci[b * n + c] - gbc * ricci[a * n + d]
                                + gbd * ricci[a * n + c])
                                / (nf - 2.0);
                            v += scalar * (gac * gbd - gad * gbc) / ((nf - 1.0) * (nf - 2.0));
                        }
                        weyl[((a * n + b) * n + c) * n + d] = v;
                    }
                }
            }
        }
        CurvatureBundle { n, riemann, ricci, scalar, weyl, rm, g: con.g.clone(), ginv: con.ginv.clone() }
    }

    #[inline]
    pub fn riem(&self, d: usize, a: usize, b: usize, c: usize) -> f64 {
        let n = self.n;
        self.riemann[((d * n + c) * n + a) * n + b]
    }
    #[inline]
    pub fn rm4(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.n;
        self.rm[((a * n + b) * n + c) * n + d]
    }
    #[inline]
    pub fn weyl4(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.n;
        self.weyl[((a * n + b) * n + c) * n + d]
    }

    /// Weyl with the first index raised: C^a_{bcd}.
    pub fn weyl_mixed(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut s = 0.0;
                        for e in 0..n {
                            s += self.ginv[a * n + e] * self.weyl4(e, b, c, d);
                        }
                        out[((a * n + b) * n + c) * n + d] = s;
                    }
                }
            }
        }
        out
    }

    /// Largest single contraction of the Weyl tensor with g^{-1}.
    pub fn weyl_trace_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        let pairs = [(0usize, 1usize), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        for &(p, q) in &pairs {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            let mut idx = [0usize; 4];
                            let mut free = [i, j].into_iter();
                            for (k, slot) in idx.iter_mut().enumerate() {
                                if k == p {
                                    *slot = a;
                                } else if k == q {
                                    *slot = b;
                                } else {
                                    *slot = free.next().unwrap();
                                }
                            }
                            s += self.ginv[a * n + b] * self.weyl4(idx[0], idx[1], idx[2], idx[3]);
                        }
                    }
                    worst = worst.max(s.abs());
                }
            }
        }
        worst
    }
}

pub fn curvature_at(model: &SpacetimeModel, p: &ChartPoint) -> Result<CurvatureBundle> {
    check(model, p)?;
    let con = connection_at(model, &p.coords, 2)?;
    Ok(CurvatureBundle::from_connection(&con))
}

/// Sectional curvature of the plane spanned by `x` and `y`.
pub fn sectional_curvature(model: &SpacetimeModel, p: &ChartPoint, x: &[f64], y: &[f64]) -> Result<f64> {
    let cb = curvature_at(model, p)?;
    sectional_from(&cb, x, y)
}

pub fn sectional_from(cb: &CurvatureBundle, x: &[f64], y: &[f64]) -> Result<f64> {
    let n = cb.n;
    let gxx = linalg::quad(&cb.g, x, x);
    let gyy = linalg::quad(&cb.g, y, y);
    let gxy = linalg::quad(&cb.g, x, y);
    let den = gxx * gyy - gxy * gxy;
    let scale = (gxx.abs() * gyy.abs()).max(1e-300);
    if den.abs() < 1e-10 * scale {
        return Err(AadsError::DegeneratePlane(format!("|den| = {:.3e}", den.abs())));
    }
    let mut num = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    num += cb.rm4(a, b, c, d) * x[a] * y[b] * x[c] * y[d];
                }
            }
        }
    }
    Ok(num / den)
}

/// Max-norm of Ric_ab − (2Λ/(d−2)) g_ab.
pub fn einstein_residual(model: &SpacetimeModel, p: &ChartPoint, lambda: f64) -> Result<f64> {
    let cb = curvature_at(model, p)?;
    let n = cb.n as f64;
    let k = 2.0 * lambda / (n - 2.0);
    Ok(cb.ricci.iter().zip(&cb.g).map(|(r, g)| (r - k * g).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy)]
pub struct ConformalCheck {
    /// Max-norm residual of the inverse conformal Ricci rule.
    pub ricci_residual: f64,
    /// |ḡ^{-1}(dz,dz) − 1/R²|.
    pub normal_defect: f64,
}

/// Checks Ric(g) = Ric(ḡ) + (d−2)/z ∇̄∇̄z + ḡ (□̄z/z − (d−1)|dz|²_ḡ/z²) for ḡ = z² g.
pub fn conformal_ricci_check(
    bulk: &SpacetimeModel,
    closure: &SpacetimeModel,
    p: &ChartPoint,
) -> Result<ConformalCheck> {
    let x = &p.coords;
    let zj = bulk
        .source
        .conformal_factor_jet(&Jet::seed(x, 2))
        .ok_or_else(|| AadsError::Config(format!("model {} has no conformal factor", bulk.label)))?;
    let n = bulk.d;
    let nf = n as f64;
    let cb = curvature_at(bulk, p)?;
    let cbar = connection_at(closure, x, 2)?;
    let cbb = CurvatureBundle::from_connection(&cbar);
    let z = crate::scalar::Scalar::value(&zj);
    let dz: Vec<f64> = (0..n).map(|a| zj.d1(a)).collect();
    let mut hess = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let mut s = zj.d2(a, b);
            for c in 0..n {
                s -= cbar.gam(c, a, b) * dz[c];
            }
            hess[a * n + b] = s;
        }
    }
    let boxz: f64 = (0..n * n).map(|k| cbar.ginv[k] * hess[k]).sum();
    let dz2 = linalg::quad(&cbar.ginv, &dz, &dz);
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let rhs = cbb.ricci[a * n + b]
                + (nf - 2.0) / z * hess[a * n + b]
                + cbar.g[a * n + b] * (boxz / z - (nf - 1.0) * dz2 / (z * z));
            worst = worst.max((cb.ricci[a * n + b] - rhs).abs());
        }
    }
    let r = bulk.ads_radius;
    Ok(ConformalCheck { ricci_residual: worst, normal_defect: (dz2 - 1.0 / (r * r)).abs() })
}
