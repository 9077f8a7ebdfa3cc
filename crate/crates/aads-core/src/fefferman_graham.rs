//! Near-boundary expansion of a conformally compactified Einstein metric in
//! Gaussian normal form `ḡ = dz² + h(z)`, `h(z) = Σ_j z^j h_j`, with the
//! cosmological constant normalised to `−(d−1)(d−2)/2`.
//!
//! With `n = d − 1` boundary dimensions, the bulk Einstein equations become
//!
//! `z h'' − (n−1) h' − z h' h⁻¹ h' + ½ z tr(h⁻¹h') h' − 2z Ric[h] − tr(h⁻¹h') h = 0`
//!
//! whose `z^{j−1}` coefficient is linear in `h_j` with operator
//! `h_j ↦ j(j−n) h_j − j tr(h_0⁻¹h_j) h_0`. It is invertible except at `j = n`,
//! where only the trace of `h_n` is fixed and the trace-free part is free data.

use crate::error::{AadsError, Result};
use crate::linalg;
use crate::scalar::Scalar;
use crate::spacetimes::{check_angles, round_metric_diag, ChartMetric};
use crate::tensor_core::{curvature_at, SpacetimeModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

type Mat = Vec<f64>;

/// Lattice over `(τ, y¹ … y^k)` with `y` stereographic coordinates on the sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
}

impl Lattice {
    fn len(&self) -> usize {
        self.shape.iter().product()
    }
    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.shape.len()];
        for i in (0..self.shape.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.shape[i + 1];
        }
        s
    }
    fn index(&self, node: usize) -> Vec<usize> {
        let st = self.strides();
        st.iter().zip(&self.shape).map(|(s, n)| (node / s) % n).collect()
    }
    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.index(node).iter().enumerate().map(|(a, &i)| self.origin[a] + i as f64 * self.spacing[a]).collect()
    }
}

/// Shape of the boundary data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// ESU_{d−1} at the reference point τ = 0, angles = π/2 (where the round metric is the identity).
    AnalyticEsu,
    /// Flat boundary in Cartesian coordinates.
    AnalyticMinkowski,
    Grid(Lattice),
}

#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub d: usize,
    pub geometry: Geometry,
    /// Boundary metric per node (one node for analytic data).
    pub metric: Vec<Mat>,
    /// Rescaled electric Weyl tensor per node, when known.
    pub electric: Option<Vec<Mat>>,
}

fn diag(v: &[f64]) -> Mat {
    let n = v.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = v[i];
    }
    m
}

impl BoundaryData {
    pub fn analytic_esu(d: usize) -> Result<Self> {
        check_d(d)?;
        let mut v = vec![1.0; d - 1];
        v[0] = -1.0;
        Ok(BoundaryData { d, geometry: Geometry::AnalyticEsu, metric: vec![diag(&v)], electric: None })
    }

    pub fn analytic_minkowski(d: usize) -> Result<Self> {
        let mut b = Self::analytic_esu(d)?;
        b.geometry = Geometry::AnalyticMinkowski;
        Ok(b)
    }

    /// ESU_{d−1} sampled in stereographic coordinates around the north pole,
    /// multiplied by `exp(2 ε sin τ cos y¹)`; `half_width` bounds each `y` axis.
    pub fn grid_esu(d: usize, n_tau: usize, n_y: usize, half_width: f64, tau_step: f64, eps: f64) -> Result<Self> {
        if !(d == 4 || d == 5) {
            return Err(AadsError::Unsupported(format!("grid boundary data are available for d = 4, 5 (got {d})")));
        }
        if n_tau < 5 || n_y < 5 || !(half_width > 0.0) || !(tau_step > 0.0) {
            return Err(AadsError::Construction("grid needs at least 5 nodes per axis and positive spacings".into()));
        }
        let n = d - 1;
        let hy = 2.0 * half_width / (n_y - 1) as f64;
        let mut shape = vec![n_y; n];
        shape[0] = n_tau;
        let mut spacing = vec![hy; n];
        spacing[0] = tau_step;
        let mut origin = vec![-half_width; n];
        origin[0] = -0.5 * tau_step * (n_tau - 1) as f64;
        let lat = Lattice { shape, spacing, origin };
        let metric = (0..lat.len())
            .map(|node| {
                let x = lat.coords(node);
                let y2: f64 = x[1..].iter().map(|y| y * y).sum();
                let w = (2.0 * eps * x[0].sin() * x[1].cos()).exp();
                let s = 4.0 / (1.0 + y2).powi(2);
                let mut v = vec![s * w; n];
                v[0] = -w;
                diag(&v)
            })
            .collect();
        Ok(BoundaryData { d, geometry: Geometry::Grid(lat), metric, electric: None })
    }

    /// Attach `E_ab` (one matrix per node, boundary coordinate components).
    pub fn with_electric(mut self, e: Vec<Mat>) -> Result<Self> {
        let n = self.d - 1;
        if e.len() != self.metric.len() || e.iter().any(|m| m.len() != n * n) {
            return Err(AadsError::Construction("electric data must match the boundary nodes".into()));
        }
        for m in &e {
            for a in 0..n {
                for b in 0..a {
                    if (m[a * n + b] - m[b * n + a]).abs() > 1e-12 * (1.0 + m[a * n + b].abs()) {
                        return Err(AadsError::Construction("E_ab must be symmetric".into()));
                    }
                }
            }
        }
        if !matches!(self.geometry, Geometry::Grid(_)) {
            check_isotropic(&e[0], n)?;
        }
        self.electric = Some(e);
        Ok(self)
    }

    /// Trace `tr(h_0⁻¹ E)` at each node (should vanish for d = 4 and d ≥ 6).
    pub fn electric_trace(&self) -> Option<f64> {
        let n = self.d - 1;
        let e = self.electric.as_ref()?;
        Some(
            e.iter()
                .zip(&self.metric)
                .map(|(e, g)| tr(&mm(&linalg::inverse_f64(g, n).unwrap(), e, n), n).abs())
                .fold(0.0, f64::max),
        )
    }
}

fn check_d(d: usize) -> Result<()> {
    if d < 3 {
        return Err(AadsError::Construction(format!("d = {d} is below 3")));
    }
    Ok(())
}

/// Analytic data carry one matrix per coefficient, so every tensor involved must
/// share the symmetry of the background: diagonal with a spatial block ∝ 1.
fn check_isotropic(m: &Mat, n: usize) -> Result<()> {
    let s = m[n + 1];
    for a in 0..n {
        for b in 0..n {
            let want = if a != b {
                0.0
            } else if a == 0 {
                m[0]
            } else {
                s
            };
            if (m[a * n + b] - want).abs() > 1e-12 * (1.0 + want.abs()) {
                return Err(AadsError::Construction(
                    "analytic boundary data need static isotropic tensors (diagonal, spatial block ∝ identity)".into(),
                ));
            }
        }
    }
    Ok(())
}

/// One coefficient `h_j`: a matrix per node, `None` where the stencil left the lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub j: usize,
    pub grid: Vec<Option<Mat>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FGCoefficientTable {
    pub d: usize,
    /// Highest coefficient index present.
    pub order: usize,
    pub geometry: Geometry,
    pub coefficients: Vec<Coefficient>,
    /// Set for odd d when the trace-free obstruction at j = d−1 is nonzero.
    pub log_term: bool,
    /// Index at which the recursion stopped for lack of `E_ab`, if it did.
    pub truncated_at: Option<usize>,
    /// Max-norm of the odd coefficients below d−1.
    pub odd_max: f64,
}

impl FGCoefficientTable {
    pub fn coefficient(&self, j: usize) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.j == j)
    }

    /// Entry `(a, b)` of `h_j` at a node.
    pub fn entry(&self, j: usize, node: usize, a: usize, b: usize) -> Option<f64> {
        let n = self.d - 1;
        self.coefficient(j)?.grid.get(node)?.as_ref().map(|m| m[a * n + b])
    }

    pub fn to_json(&self) -> String {
        crate::io::to_json(&serde_json::to_value(self).expect("table serialises"))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| AadsError::Config(format!("coefficient table: {e}")))
    }

    fn fields(&self) -> Vec<Vec<Mat>> {
        let n = self.d - 1;
        self.coefficients
            .iter()
            .map(|c| c.grid.iter().map(|m| m.clone().unwrap_or_else(|| vec![f64::NAN; n * n])).collect())
            .collect()
    }
}

// ---- matrix and series helpers ----

fn mm(a: &[f64], b: &[f64], n: usize) -> Mat {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

fn tr(a: &[f64], n: usize) -> f64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

fn axpy(acc: &mut [f64], s: f64, x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += s * b;
    }
}

/// Cauchy product of matrix series, truncated to `len` terms.
fn ser_mul(a: &[Mat], b: &[Mat], n: usize, len: usize) -> Vec<Mat> {
    (0..len)
        .map(|k| {
            let mut c = vec![0.0; n * n];
            for i in 0..=k {
                if i < a.len() && k - i < b.len() {
                    axpy(&mut c, 1.0, &mm(&a[i], &b[k - i], n));
                }
            }
            c
        })
        .collect()
}

fn ser_inv(h: &[Mat], n: usize, len: usize) -> Option<Vec<Mat>> {
    let h0i = linalg::inverse_f64(&h[0], n)?;
    let mut out = vec![h0i.clone()];
    for k in 1..len {
        let mut s = vec![0.0; n * n];
        for i in 1..=k.min(h.len() - 1) {
            axpy(&mut s, 1.0, &mm(&h[i], &out[k - i], n));
        }
        out.push(mm(&h0i, &s, n).iter().map(|v| -v).collect());
    }
    Some(out)
}

fn ser_deriv(h: &[Mat]) -> Vec<Mat> {
    (1..h.len()).map(|k| h[k].iter().map(|v| v * k as f64).collect()).collect()
}

/// Scalar series `tr(A·B)`.
fn ser_tr(a: &[Mat], b: &[Mat], n: usize, len: usize) -> Vec<f64> {
    ser_mul(a, b, n, len).iter().map(|m| tr(m, n)).collect()
}

/// Pointwise geometric series at one node: `h⁻¹`, `Γ^a_bc`, `Ric_ab`.
struct NodeGeometry {
    hinv: Vec<Mat>,
    /// gam[k][(a*n+b)*n+c]
    gam: Vec<Vec<f64>>,
    ric: Vec<Mat>,
}

fn node_geometry(h: &[Mat], dh: &[Vec<Mat>], ddh: &[Vec<Mat>], n: usize) -> Option<NodeGeometry> {
    let len = h.len();
    let hinv = ser_inv(h, n, len)?;
    let n3 = n * n * n;
    let glow: Vec<Vec<f64>> = (0..len)
        .map(|k| {
            let mut g = vec![0.0; n3];
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        g[(a * n + b) * n + c] = 0.5 * (dh[k][b][a * n + c] + dh[k][c][a * n + b] - dh[k][a][b * n + c]);
                    }
                }
            }
            g
        })
        .collect();
    let raise = |low: &[Vec<f64>], inv: &[Mat]| -> Vec<Vec<f64>> {
        (0..len)
            .map(|k| {
                let mut g = vec![0.0; n3];
                for i in 0..=k {
                    for a in 0..n {
                        for e in 0..n {
                            let w = inv[i][a * n + e];
                            if w == 0.0 {
                                continue;
                            }
                            for bc in 0..n * n {
                                g[a * n * n + bc] += w * low[k - i][e * n * n + bc];
                            }
                        }
                    }
                }
                g
            })
            .collect()
    };
    let gam = raise(&glow, &hinv);
    // ∂_f Γ^a_bc
    let mut dgam: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
    for f in 0..n {
        let dhf: Vec<Mat> = (0..len).map(|k| dh[k][f].clone()).collect();
        let t = ser_mul(&ser_mul(&hinv, &dhf, n, len), &hinv, n, len);
        let dinv: Vec<Mat> = t.iter().map(|m| m.iter().map(|v| -v).collect()).collect();
        let dlow: Vec<Vec<f64>> = (0..len)
            .map(|k| {
                let mut g = vec![0.0; n3];
                for e in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            g[(e * n + b) * n + c] = 0.5
                                * (ddh[k][b * n + f][e * n + c] + ddh[k][c * n + f][e * n + b] - ddh[k][e * n + f][b * n + c]);
                        }
                    }
                }
                g
            })
            .collect();
        let p1 = raise(&glow, &dinv);
        let p2 = raise(&dlow, &hinv);
        dgam.push(p1.iter().zip(&p2).map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect()).collect());
    }
    let ric = (0..len)
        .map(|k| {
            let mut r = vec![0.0; n * n];
            for b in 0..n {
                for dd in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        s += dgam[a][k][(a * n + b) * n + dd] - dgam[dd][k][(a * n + b) * n + a];
                        for i in 0..=k {
                            for e in 0..n {
                                s += gam[i][(a * n + a) * n + e] * gam[k - i][(e * n + b) * n + dd]
                                    - gam[i][(a * n + dd) * n + e] * gam[k - i][(e * n + b) * n + a];
                            }
                        }
                    }
                    r[b * n + dd] = s;
                }
            }
            r
        })
        .collect();
    Some(NodeGeometry { hinv, gam, ric })
}

// ---- finite differences on the lattice ----

const D1: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const D2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];

fn neighbour(lat: &Lattice, idx: &[usize], axis: usize, off: i64, strides: &[usize], node: usize) -> Option<usize> {
    let i = idx[axis] as i64 + off;
    if i < 0 || i >= lat.shape[axis] as i64 {
        return None;
    }
    Some((node as i64 + off * strides[axis] as i64) as usize)
}

/// First derivatives of every node matrix along each axis: out[node][axis].
fn fd1(lat: &Lattice, f: &[Mat], m: usize) -> Vec<Vec<Mat>> {
    let st = lat.strides();
    let dim = lat.shape.len();
    (0..f.len())
        .into_par_iter()
        .map(|node| {
            let idx = lat.index(node);
            (0..dim)
                .map(|ax| {
                    let mut out = vec![0.0; m];
                    for (s, w) in D1.iter().enumerate() {
                        if *w == 0.0 {
                            continue;
                        }
                        match neighbour(lat, &idx, ax, s as i64 - 2, &st, node) {
                            Some(nb) => axpy(&mut out, *w / (12.0 * lat.spacing[ax]), &f[nb]),
                            None => return vec![f64::NAN; m],
                        }
                    }
                    out
                })
                .collect()
        })
        .collect()
}

/// Second derivatives: out[node][a*dim+b].
fn fd2(lat: &Lattice, f: &[Mat], m: usize) -> Vec<Vec<Mat>> {
    let st = lat.strides();
    let dim = lat.shape.len();
    (0..f.len())
        .into_par_iter()
        .map(|node| {
            let idx = lat.index(node);
            let mut out = vec![vec![0.0; m]; dim * dim];
            for a in 0..dim {
                for b in a..dim {
                    let mut acc = vec![0.0; m];
                    let mut ok = true;
                    if a == b {
                        for (s, w) in D2.iter().enumerate() {
                            match neighbour(lat, &idx, a, s as i64 - 2, &st, node) {
                                Some(nb) => axpy(&mut acc, *w / (12.0 * lat.spacing[a].powi(2)), &f[nb]),
                                None => ok = false,
                            }
                        }
                    } else {
                        'outer: for (s, wa) in D1.iter().enumerate() {
                            for (t, wb) in D1.iter().enumerate() {
                                if *wa == 0.0 || *wb == 0.0 {
                                    continue;
                                }
                                let Some(n1) = neighbour(lat, &idx, a, s as i64 - 2, &st, node) else {
                                    ok = false;
                                    break 'outer;
                                };
                                let idx1 = lat.index(n1);
                                let Some(n2) = neighbour(lat, &idx1, b, t as i64 - 2, &st, n1) else {
                                    ok = false;
                                    break 'outer;
                                };
                                axpy(&mut acc, wa * wb / (144.0 * lat.spacing[a] * lat.spacing[b]), &f[n2]);
                            }
                        }
                    }
                    if !ok {
                        acc = vec![f64::NAN; m];
                    }
                    out[a * dim + b] = acc.clone();
                    out[b * dim + a] = acc;
                }
            }
            out
        })
        .collect()
}

/// Per-node geometric series for the coefficient fields `h[k][node]`.
/// Only coefficients `k ≤ deriv_upto` are differentiated; `Ric_k` depends on
/// derivatives of `h_0 … h_k` alone, so higher orders of the result are then meaningless.
fn geometry_fields(geom: &Geometry, h: &[Vec<Mat>], n: usize, deriv_upto: usize) -> Vec<Option<NodeGeometry>> {
    let len = h.len();
    let nodes = h[0].len();
    match geom {
        Geometry::AnalyticEsu | Geometry::AnalyticMinkowski => {
            let series: Vec<Mat> = (0..len).map(|k| h[k][0].clone()).collect();
            let Some(hinv) = ser_inv(&series, n, len) else {
                return vec![None];
            };
            let mut ric = vec![vec![0.0; n * n]; len];
            if *geom == Geometry::AnalyticEsu {
                // the round sphere's Ricci tensor does not scale with its radius
                for i in 1..n {
                    ric[0][i * n + i] = (n as f64) - 2.0;
                }
            }
            vec![Some(NodeGeometry { hinv, gam: vec![vec![0.0; n * n * n]; len], ric })]
        }
        Geometry::Grid(lat) => {
            let dim = lat.shape.len();
            let flat = |k: usize, per: usize| vec![vec![vec![0.0; n * n]; per]; h[k].len()];
            let d1: Vec<Vec<Vec<Mat>>> =
                (0..len).map(|k| if k <= deriv_upto { fd1(lat, &h[k], n * n) } else { flat(k, dim) }).collect();
            let d2: Vec<Vec<Vec<Mat>>> =
                (0..len).map(|k| if k <= deriv_upto { fd2(lat, &h[k], n * n) } else { flat(k, dim * dim) }).collect();
            (0..nodes)
                .into_par_iter()
                .map(|node| {
                    let hs: Vec<Mat> = (0..len).map(|k| h[k][node].clone()).collect();
                    if hs.iter().flatten().any(|v| !v.is_finite()) {
                        return None;
                    }
                    let dh: Vec<Vec<Mat>> = (0..len).map(|k| d1[k][node].clone()).collect();
                    let ddh: Vec<Vec<Mat>> = (0..len).map(|k| d2[k][node].clone()).collect();
                    if dh.iter().chain(&ddh).flatten().flatten().any(|v| !v.is_finite()) {
                        return None;
                    }
                    node_geometry(&hs, &dh, &ddh, n)
                })
                .collect()
        }
    }
}

/// Coefficient of `z^k` in the evolution operator applied to the series `h`.
fn evolution_coeff(h: &[Mat], hinv: &[Mat], ric: &[Mat], k: usize, n: usize) -> Mat {
    let len = h.len();
    let hp = ser_deriv(h);
    let s = ser_tr(hinv, &hp, n, len.saturating_sub(1).max(1));
    let zero = vec![0.0; n * n];
    let get = |v: &[Mat], i: usize| v.get(i).cloned().unwrap_or_else(|| zero.clone());
    let mut f = vec![0.0; n * n];
    let hk1 = get(h, k + 1);
    axpy(&mut f, ((k + 1) * k) as f64 - (n as f64 - 1.0) * (k + 1) as f64, &hk1);
    if k >= 1 {
        let q = ser_mul(&ser_mul(&hp, hinv, n, k), &hp, n, k);
        axpy(&mut f, -1.0, &q[k - 1]);
        for i in 0..k {
            axpy(&mut f, 0.5 * s.get(i).copied().unwrap_or(0.0), &get(&hp, k - 1 - i));
        }
        axpy(&mut f, -2.0, &get(ric, k - 1));
    }
    for i in 0..=k {
        axpy(&mut f, -s.get(i).copied().unwrap_or(0.0), &get(h, k - i));
    }
    f
}

/// `tr(h_0⁻¹ h_j)` from the z^{j−2} coefficient of the zz equation
/// `tr(h⁻¹h'') − tr(h⁻¹h')/z − ½ tr(h⁻¹h'h⁻¹h') = 0`, given `h_0 … h_{j−1}` and `h_j = 0`.
fn zz_trace(h: &[Mat], hinv: &[Mat], j: usize, n: usize) -> f64 {
    let hp = ser_deriv(h);
    let hpp = ser_deriv(&hp);
    let a = ser_tr(hinv, &hpp, n, j - 1)[j - 2];
    let b = ser_tr(hinv, &hp, n, j)[j - 1];
    let q = ser_mul(&ser_mul(hinv, &hp, n, j - 1), &ser_mul(hinv, &hp, n, j - 1), n, j - 1);
    let c = tr(&q[j - 2], n);
    -(a - b - 0.5 * c) / (j * (j - 2)) as f64
}

/// Coefficients `h_0 … h_order` from the boundary data.
pub fn fg_expand(data: &BoundaryData, order: usize) -> Result<FGCoefficientTable> {
    let d = data.d;
    let n = d - 1;
    if order < 1 {
        return Err(AadsError::Precondition("order must be at least 1".into()));
    }
    for g in &data.metric {
        let ev = linalg::sym_eigenvalues(g, n);
        if ev.iter().filter(|v| **v < 0.0).count() != 1 || ev.iter().any(|v| *v == 0.0) {
            return Err(AadsError::Construction("boundary metric is not Lorentzian at every node".into()));
        }
    }
    let nodes = data.metric.len();
    let mut h: Vec<Vec<Mat>> = vec![data.metric.clone()];
    let mut log_term = false;
    let mut truncated_at = None;
    for j in 1..=order {
        let mut trial = h.clone();
        trial.push(vec![vec![0.0; n * n]; nodes]);
        let geo = geometry_fields(&data.geometry, &trial, n, j.saturating_sub(2));
        let mut next = Vec::with_capacity(nodes);
        let mut obstruction: f64 = 0.0;
        for node in 0..nodes {
            let Some(g) = &geo[node] else {
                next.push(vec![f64::NAN; n * n]);
                continue;
            };
            let hs: Vec<Mat> = (0..=j).map(|k| trial[k][node].clone()).collect();
            let rhs: Mat = evolution_coeff(&hs, &g.hinv, &g.ric, j - 1, n).iter().map(|v| -v).collect();
            let h0 = &hs[0];
            let h0i = &g.hinv[0];
            let trace = tr(&mm(h0i, &rhs, n), n);
            let jf = j as f64;
            let nf = n as f64;
            if j == n {
                let t = -trace / (nf * nf);
                let mut tf = rhs.clone();
                axpy(&mut tf, -trace / nf, h0);
                obstruction = obstruction.max(linalg::max_abs(&tf));
                let mut hj = h0.iter().map(|v| v * t / nf).collect::<Mat>();
                if let Some(e) = &data.electric {
                    axpy(&mut hj, -2.0 / (d as f64 - 1.0), &e[node]);
                }
                next.push(hj);
            } else {
                // the trace of the ab equation degenerates at j = 2n; the zz equation fixes it there
                let t = if j == 2 * n { zz_trace(&hs, &g.hinv, j, n) } else { trace / (jf * (jf - 2.0 * nf)) };
                let mut hj = rhs.clone();
                axpy(&mut hj, jf * t, h0);
                next.push(hj.iter().map(|v| v / (jf * (jf - nf))).collect());
            }
        }
        if j == n {
            if d % 2 == 1 && obstruction > 1e-10 {
                log_term = true;
                break;
            }
            if data.electric.is_none() {
                truncated_at = Some(j);
                break;
            }
        }
        h.push(next);
    }
    let odd_max = h
        .iter()
        .enumerate()
        .filter(|(j, _)| j % 2 == 1 && *j < n)
        .flat_map(|(_, f)| f.iter().flatten().filter(|v| v.is_finite()).map(|v| v.abs()))
        .fold(0.0, f64::max);
    let coefficients = h
        .iter()
        .enumerate()
        .map(|(j, f)| Coefficient {
            j,
            grid: f.iter().map(|m| if m.iter().all(|v| v.is_finite()) { Some(m.clone()) } else { None }).collect(),
        })
        .collect();
    Ok(FGCoefficientTable {
        d,
        order: h.len() - 1,
        geometry: data.geometry.clone(),
        coefficients,
        log_term,
        truncated_at,
        odd_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintResidual {
    pub hamiltonian: f64,
    pub momentum: f64,
}

/// Max-norm of the Hamiltonian and momentum constraints of the truncated series,
/// summed over the orders the table determines, at each `z` in `zs`.
pub fn fg_constraint_residual_at(table: &FGCoefficientTable, zs: &[f64]) -> Result<ConstraintResidual> {
    let d = table.d;
    let n = d - 1;
    let order = table.order;
    if order < 2 {
        return Err(AadsError::Precondition("constraint residuals need order ≥ 2".into()));
    }
    let h = table.fields();
    let len = order + 1;
    let nodes = h[0].len();
    let geo = geometry_fields(&table.geometry, &h, n, order);
    // K^a_b = −½ (h⁻¹ h')
    let mut kfield: Vec<Vec<Mat>> = vec![vec![vec![f64::NAN; n * n]; nodes]; order];
    for node in 0..nodes {
        if let Some(g) = &geo[node] {
            let hs: Vec<Mat> = (0..len).map(|k| h[k][node].clone()).collect();
            let kk = ser_mul(&g.hinv, &ser_deriv(&hs), n, order);
            for k in 0..order {
                kfield[k][node] = kk[k].iter().map(|v| -0.5 * v).collect();
            }
        }
    }
    let dk: Option<Vec<Vec<Vec<Mat>>>> = match &table.geometry {
        Geometry::Grid(lat) => Some(kfield.iter().map(|f| fd1(lat, f, n * n)).collect()),
        _ => None,
    };
    let mut ham: f64 = 0.0;
    let mut mom: f64 = 0.0;
    for node in 0..nodes {
        let Some(g) = &geo[node] else { continue };
        let ks: Vec<Mat> = (0..order).map(|k| kfield[k][node].clone()).collect();
        let trk: Vec<f64> = ks.iter().map(|m| tr(m, n)).collect();
        let r = ser_tr(&g.hinv, &g.ric, n, len);
        let kk = ser_tr(&ks, &ks, n, order);
        // H_k valid for k ≤ order − 2
        let hk: Vec<f64> = (0..=order - 2)
            .map(|k| {
                let tt: f64 = (0..=k).map(|i| trk[i] * trk[k - i]).sum();
                r[k] + kk[k] - tt - 2.0 * (d as f64 - 2.0) * trk[k + 1]
            })
            .collect();
        // M_k valid for k ≤ order − 1
        let mk: Vec<Vec<f64>> = (0..order)
            .map(|k| {
                (0..n)
                    .map(|b| {
                        let mut s = 0.0;
                        if let Some(dk) = &dk {
                            for a in 0..n {
                                s += dk[k][node][a][a * n + b];
                            }
                            s -= (0..n).map(|c| dk[k][node][b][c * n + c]).sum::<f64>();
                        }
                        for i in 0..=k {
                            for a in 0..n {
                                for c in 0..n {
                                    s += g.gam[i][(a * n + a) * n + c] * ks[k - i][c * n + b]
                                        - g.gam[i][(c * n + a) * n + b] * ks[k - i][a * n + c];
                                }
                            }
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        for &z in zs {
            let hv: f64 = hk.iter().enumerate().map(|(k, v)| v * z.powi(k as i32)).sum();
            if hv.is_finite() {
                ham = ham.max(hv.abs());
            }
            for b in 0..n {
                let mv: f64 = mk.iter().enumerate().map(|(k, v)| v[b] * z.powi(k as i32)).sum();
                if mv.is_finite() {
                    mom = mom.max(mv.abs());
                }
            }
        }
    }
    Ok(ConstraintResidual { hamiltonian: ham, momentum: mom })
}

/// Constraint residuals at z = 0.05 and 0.1.
pub fn fg_constraint_residual(table: &FGCoefficientTable) -> Result<ConstraintResidual> {
    fg_constraint_residual_at(table, &[0.05, 0.1])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElectricWeyl {
    /// `E_ab` over the boundary coordinates of the chart.
    pub e: Mat,
    pub error: f64,
}

/// `E_ab = (1/(d−3)) lim z^{3−d} C(ḡ)_{aZbZ}` at a boundary point (chart coordinates without `z`),
/// for charts whose boundary coordinate is a Gaussian normal coordinate of `ḡ`.
pub fn electric_weyl(model: &SpacetimeModel, boundary: &[f64]) -> Result<ElectricWeyl> {
    let d = model.d;
    if d < 4 {
        return Err(AadsError::Precondition("electric Weyl data need d ≥ 4".into()));
    }
    let id = model.chart_id();
    let base = id.trim_end_matches("+closure");
    if !matches!(base, "ads_closure" | "ads_poincare" | "schw_fg" | "fg") {
        return Err(AadsError::Unsupported(format!("chart {id} is not in Gaussian normal form near the boundary")));
    }
    let zi = model.source.boundary_coordinate().unwrap();
    let closure = if id.ends_with("+closure") { model.clone() } else { model.closure()? };
    let n = d - 1;
    if boundary.len() != n {
        return Err(AadsError::Precondition(format!("boundary point needs {n} coordinates")));
    }
    let bidx: Vec<usize> = (0..d).filter(|&i| i != zi).collect();
    let zs = [0.1, 0.05, 0.025];
    let mut samples: Vec<Mat> = Vec::new();
    for &z in &zs {
        let mut x = boundary.to_vec();
        x.insert(zi, z);
        let cb = curvature_at(&closure, &closure.point(&x))?;
        let scale = z.powi(3 - d as i32) / (d as f64 - 3.0);
        let mut m = vec![0.0; n * n];
        for (a, &ia) in bidx.iter().enumerate() {
            for (b, &ib) in bidx.iter().enumerate() {
                m[a * n + b] = scale * cb.weyl4(ia, zi, ib, zi);
            }
        }
        samples.push(m);
    }
    let mut e = vec![0.0; n * n];
    let mut err: f64 = 0.0;
    for k in 0..n * n {
        let v: Vec<f64> = samples.iter().map(|m| m[k]).collect();
        let (lim, de) = crate::numerics::richardson(&v, 2.0, 1);
        let d1 = (v[1] - v[0]).abs();
        let d2 = (v[2] - v[1]).abs();
        let floor = 1e-9 * (1.0 + v[2].abs());
        if d2 > floor && d2 > 0.75 * d1 {
            return Err(AadsError::Divergence(format!("electric Weyl component {k} does not settle: differences {d1:.3e}, {d2:.3e}")));
        }
        e[k] = lim;
        err = err.max(de);
    }
    Ok(ElectricWeyl { e, error: err })
}

/// Bulk metric `(dz² + h(z))/z²` rebuilt from an analytic table, in `(t, z, angles)`
/// for ESU tables and `(t, z, x…)` for flat ones.
pub struct FgMetricChart {
    d: usize,
    flat: bool,
    /// Coefficients of `h_tt(z)` and of the spatial factor.
    tt: Vec<f64>,
    ss: Vec<f64>,
    z_max: f64,
}

impl FgMetricChart {
    pub fn new(t: &FGCoefficientTable) -> Result<Self> {
        let flat = match t.geometry {
            Geometry::AnalyticEsu => false,
            Geometry::AnalyticMinkowski => true,
            Geometry::Grid(_) => {
                return Err(AadsError::Unsupported("bulk reconstruction is available for analytic tables".into()));
            }
        };
        let n = t.d - 1;
        let mut tt = Vec::new();
        let mut ss = Vec::new();
        for j in 0..=t.order {
            let m = t
                .coefficient(j)
                .and_then(|c| c.grid.first().cloned().flatten())
                .ok_or_else(|| AadsError::Construction(format!("table is missing coefficient {j}")))?;
            check_isotropic(&m, n)?;
            tt.push(m[0]);
            ss.push(m[n + 1]);
        }
        let mut chart = FgMetricChart { d: t.d, flat, tt, ss, z_max: 1.0 };
        // largest z below 1 where h keeps its signature
        let mut z = 0.0;
        while z < 1.0 {
            z += 1e-3;
            if horner(&chart.tt, z) >= 0.0 || horner(&chart.ss, z) <= 0.0 {
                break;
            }
        }
        chart.z_max = z.min(1.0);
        Ok(chart)
    }
}

fn horner(c: &[f64], z: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * z + v)
}

fn horner_s<S: Scalar>(c: &[f64], z: &S) -> S {
    c.iter().rev().fold(S::from(0.0), |acc, v| acc * z.clone() + *v)
}

impl FgMetricChart {
    fn closure_form<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.d;
        let z = &x[1];
        let mut g = vec![S::from(0.0); n * n];
        g[0] = horner_s(&self.tt, z);
        g[n + 1] = S::from(1.0);
        let s = horner_s(&self.ss, z);
        if self.flat {
            for i in 2..n {
                g[i * n + i] = s.clone();
            }
        } else {
            for (i, w) in round_metric_diag(&x[2..]).into_iter().enumerate() {
                g[(i + 2) * n + i + 2] = s.clone() * w;
            }
        }
        g
    }
}

impl ChartMetric for FgMetricChart {
    fn dim(&self) -> usize {
        self.d
    }
    fn id(&self) -> &str {
        "fg"
    }
    fn domain(&self, x: &[f64]) -> Result<()> {
        if !(x[1] > 0.0 && x[1] < self.z_max) {
            return Err(AadsError::Domain(format!("z = {} outside (0, {})", x[1], self.z_max)));
        }
        if self.flat {
            Ok(())
        } else {
            check_angles(&x[2..], 2)
        }
    }
    fn closure_domain(&self, x: &[f64]) -> Result<()> {
        if !(x[1] > -self.z_max.min(0.5) && x[1] < self.z_max) {
            return Err(AadsError::Domain(format!("z = {} outside the closure domain", x[1])));
        }
        if self.flat {
            Ok(())
        } else {
            check_angles(&x[2..], 2)
        }
    }
    fn metric<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let inv = x[1].sq().recip();
        self.closure_form(x).into_iter().map(|g| g * inv.clone()).collect()
    }
    fn z<S: Scalar>(&self, x: &[S]) -> Option<S> {
        Some(x[1].clone())
    }
    fn closure_metric<S: Scalar>(&self, x: &[S]) -> Option<Vec<S>> {
        Some(self.closure_form(x))
    }
    fn boundary_coordinate(&self) -> Option<usize> {
        Some(1)
    }
}

/// Reference boundary point `(0, π/2, …)` of the analytic ESU tables.
pub fn reference_point(d: usize) -> Vec<f64> {
    let mut p = vec![FRAC_PI_2; d - 1];
    p[0] = 0.0;
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spacetimes::{build_model, Family, ModelSpec};

    #[test]
    fn esu_coefficients_match_ads() {
        for d in [4, 5, 6] {
            let t = fg_expand(&BoundaryData::analytic_esu(d).unwrap(), d - 2).unwrap();
            let n = d - 1;
            assert!((t.entry(2, 0, 0, 0).unwrap() + 0.5).abs() < 1e-12);
            assert!((t.entry(2, 0, 1, 1).unwrap() + 0.5).abs() < 1e-12);
            if d >= 6 {
                assert!((t.entry(4, 0, 0, 0).unwrap() + 1.0 / 16.0).abs() < 1e-12);
                assert!((t.entry(4, 0, n - 1, n - 1).unwrap() - 1.0 / 16.0).abs() < 1e-12);
            }
            assert!(t.odd_max < 1e-14);
            assert_eq!(t.entry(1, 0, 0, 0), Some(0.0));
        }
    }

    #[test]
    fn zz_trace_agrees_with_the_recursion() {
        let n = 3;
        let e = vec![0.2, 0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.1];
        let t = fg_expand(&BoundaryData::analytic_esu(4).unwrap().with_electric(vec![e]).unwrap(), 8).unwrap();
        assert_eq!(t.order, 8);
        let hs: Vec<Mat> = (0..=8).map(|j| t.coefficient(j).unwrap().grid[0].clone().unwrap()).collect();
        for j in [4, 5, 7, 8] {
            let mut trial = hs[..j].to_vec();
            trial.push(vec![0.0; n * n]);
            let hinv = ser_inv(&trial, n, j + 1).unwrap();
            let want = tr(&mm(&hinv[0], &hs[j], n), n);
            assert!((zz_trace(&trial, &hinv, j, n) - want).abs() < 1e-12, "j={j}");
        }
        assert!(hs.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn truncation_without_electric_data() {
        let t = fg_expand(&BoundaryData::analytic_esu(4).unwrap(), 4).unwrap();
        assert_eq!(t.truncated_at, Some(3));
        assert_eq!(t.order, 2);
        let e = BoundaryData::analytic_esu(4).unwrap().with_electric(vec![vec![0.0; 9]]).unwrap();
        let t = fg_expand(&e, 4).unwrap();
        assert_eq!(t.order, 4);
        assert!((t.entry(4, 0, 0, 0).unwrap() + 1.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn minkowski_coefficients_vanish() {
        let t = fg_expand(&BoundaryData::analytic_minkowski(5).unwrap(), 3).unwrap();
        for j in 1..=3 {
            assert!(t.coefficient(j).unwrap().grid[0].as_ref().unwrap().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn pure_ads_constraints_and_broken_table() {
        let e = BoundaryData::analytic_esu(4).unwrap().with_electric(vec![vec![0.0; 9]]).unwrap();
        let t = fg_expand(&e, 4).unwrap();
        let r = fg_constraint_residual(&t).unwrap();
        assert!(r.hamiltonian < 1e-12 && r.momentum < 1e-12, "{r:?}");
        let mut broken = t.clone();
        broken.coefficients[2].grid[0] = Some(vec![0.0; 9]);
        assert!(fg_constraint_residual(&broken).unwrap().hamiltonian > 1e-2);
    }

    #[test]
    fn table_json_round_trip() {
        let t = fg_expand(&BoundaryData::analytic_esu(5).unwrap(), 3).unwrap();
        let back = FGCoefficientTable::from_json(&t.to_json()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn ads_has_no_electric_weyl() {
        let m = build_model(&ModelSpec::new(Family::AdsClosure, 4, 1.0)).unwrap();
        let e = electric_weyl(&m, &reference_point(4)).unwrap();
        assert!(linalg::max_abs(&e.e) < 1e-6, "{e:?}");
    }

    #[test]
    fn grid_rejects_other_dimensions() {
        assert!(matches!(BoundaryData::grid_esu(6, 7, 7, 0.5, 0.1, 0.0), Err(AadsError::Unsupported(_))));
    }

    fn grid_h2_error(d: usize, ny: usize) -> f64 {
        let bd = BoundaryData::grid_esu(d, 9, ny, 0.6, 0.1, 0.0).unwrap();
        let t = fg_expand(&bd, 2).unwrap();
        let n = d - 1;
        let mut worst: f64 = 0.0;
        for (node, c) in t.coefficient(2).unwrap().grid.iter().enumerate() {
            if let Some(m) = c {
                for a in 0..n {
                    // ½ on the time entry (h_0 = −1), −½ h_0 on the sphere block
                    let sign = if a == 0 { 0.5 } else { -0.5 };
                    worst = worst.max((m[a * n + a] - sign * bd.metric[node][a * n + a]).abs());
                }
            }
        }
        worst
    }

    #[test]
    fn grid_esu_converges_at_fourth_order() {
        let coarse = grid_h2_error(4, 17);
        let fine = grid_h2_error(4, 33);
        assert!(fine < 1e-4 && coarse / fine > 8.0, "{coarse:.3e} {fine:.3e}");
        assert!(grid_h2_error(5, 13) < 1e-2);
    }

    #[test]
    fn perturbed_grid_constraints_converge() {
        let res = |ny| {
            let bd = BoundaryData::grid_esu(4, 13, ny, 0.8, 0.1, 1e-3).unwrap();
            fg_constraint_residual(&fg_expand(&bd, 2).unwrap()).unwrap()
        };
        let (a, b) = (res(17), res(33));
        assert!(b.hamiltonian < 1e-5 && b.momentum < 1e-5 && b.momentum > 0.0, "{b:?}");
        assert!(a.momentum / b.momentum >= 8.0);
    }

    fn schw_electric(d: usize, m: f64) -> (SpacetimeModel, Mat) {
        let model = build_model(&ModelSpec::new(Family::SchwarzschildAds, d, 1.0).with_mass(m).with_chart("fg")).unwrap();
        let e = electric_weyl(&model, &reference_point(d)).unwrap().e;
        (model, e)
    }

    #[test]
    fn electric_weyl_is_linear_in_mass() {
        let (_, e1) = schw_electric(4, 0.05);
        let (_, e2) = schw_electric(4, 0.1);
        assert!(e2[0].abs() > 1e-3);
        assert!((e2[0] / e1[0] - 2.0).abs() < 0.04);
    }

    #[test]
    fn expansion_round_trip_reproduces_schwarzschild() {
        for d in [4, 5] {
            let (model, e) = schw_electric(d, 0.1);
            let t = fg_expand(&BoundaryData::analytic_esu(d).unwrap().with_electric(vec![e]).unwrap(), d).unwrap();
            let rebuilt = build_model(&ModelSpec { table: Some(t), ..ModelSpec::new(Family::FgMetric, d, 1.0) }).unwrap();
            let mut x = reference_point(d);
            x.insert(1, 0.05);
            let a = rebuilt.closure().unwrap().source.metric_f64(&x);
            let b = model.closure().unwrap().source.metric_f64(&x);
            assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-4));
        }
    }

    #[test]
    fn rebuilt_ads_is_einstein() {
        let e = BoundaryData::analytic_esu(4).unwrap().with_electric(vec![vec![0.0; 9]]).unwrap();
        let t = fg_expand(&e, 4).unwrap();
        let m = build_model(&ModelSpec { table: Some(t), ..ModelSpec::new(Family::FgMetric, 4, 1.0) }).unwrap();
        for z in [0.05, 0.1, 0.5] {
            let r = crate::tensor_core::einstein_residual(&m, &m.point(&[0.0, z, 1.2, 0.3]), -3.0).unwrap();
            assert!(r < 1e-6, "{z}: {r}");
        }
    }

    #[test]
    fn grid_tables_cannot_build_bulk() {
        let bd = BoundaryData::grid_esu(4, 7, 7, 0.5, 0.1, 0.0).unwrap();
        let t = fg_expand(&bd, 2).unwrap();
        assert!(matches!(FgMetricChart::new(&t), Err(AadsError::Unsupported(_))));
    }
}
