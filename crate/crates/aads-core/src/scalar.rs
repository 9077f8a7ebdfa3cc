//! Generic scalars: plain `f64` and truncated multivariate Taylor jets.
//!
//! Metric functions are written once over [`Scalar`] and evaluated either on
//! `f64` (values) or on [`Jet`] (values plus exact partial derivatives up to the
//! jet degree).

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

pub trait Scalar:
    Clone
    + Send
    + Sync
    + fmt::Debug
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    /// Taylor degree carried by this scalar (0 for plain numbers).
    fn degree(&self) -> usize;
    /// `Σ_k taylor[k] (x - x0)^k` with `x0 = self.value()`; `taylor[k]` is
    /// `f^(k)(x0)/k!`. Entries beyond the degree are ignored.
    fn compose(&self, taylor: &[f64]) -> Self;

    fn sin(&self) -> Self {
        let a = self.value();
        let (s, c) = a.sin_cos();
        let cyc = [s, c, -s, -c];
        self.compose(&taylor_from(self.degree(), |k| cyc[k % 4]))
    }
    fn cos(&self) -> Self {
        let a = self.value();
        let (s, c) = a.sin_cos();
        let cyc = [c, -s, -c, s];
        self.compose(&taylor_from(self.degree(), |k| cyc[k % 4]))
    }
    fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&taylor_from(self.degree(), |_| e))
    }
    fn ln(&self) -> Self {
        let a = self.value();
        let n = self.degree();
        let mut t = vec![a.ln()];
        for k in 1..=n {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            t.push(sign / (k as f64 * a.powi(k as i32)));
        }
        self.compose(&t)
    }
    fn powf(&self, p: f64) -> Self {
        let a = self.value();
        let n = self.degree();
        let mut t = Vec::with_capacity(n + 1);
        let mut binom = 1.0;
        for k in 0..=n {
            t.push(binom * a.powf(p - k as f64));
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        self.compose(&t)
    }
    fn sqrt(&self) -> Self {
        self.powf(0.5)
    }
    fn recip(&self) -> Self {
        let a = self.value();
        let n = self.degree();
        let mut t = Vec::with_capacity(n + 1);
        let mut c = 1.0 / a;
        for _ in 0..=n {
            t.push(c);
            c *= -1.0 / a;
        }
        self.compose(&t)
    }
    fn powi(&self, n: i32) -> Self {
        if n == 0 {
            return Self::from(1.0);
        }
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc * self.clone();
        }
        acc
    }
    fn sq(&self) -> Self {
        self.clone() * self.clone()
    }
}

/// Taylor coefficients `f^(k)/k!` from a closure giving `f^(k)`.
pub fn taylor_from(n: usize, f: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut fact = 1.0;
    for k in 0..=n {
        if k > 0 {
            fact *= k as f64;
        }
        out.push(f(k) / fact);
    }
    out
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn degree(&self) -> usize {
        0
    }
    fn compose(&self, taylor: &[f64]) -> Self {
        taylor[0]
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn recip(&self) -> Self {
        1.0 / *self
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
}

/// Monomial bookkeeping shared by all jets of the same shape.
pub struct JetSpace {
    nvars: usize,
    degree: usize,
    monos: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// (i, j, k): mono_i * mono_j = mono_k, restricted to deg_i + deg_j <= degree.
    mul_table: Vec<(u32, u32, u32)>,
    /// Per variable: (source, target, factor) for the partial derivative.
    deriv: Vec<Vec<(u32, u32, f64)>>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JetSpace(n={}, deg={}, len={})", self.nvars, self.degree, self.monos.len())
    }
}

impl JetSpace {
    pub fn new(nvars: usize, degree: usize) -> Arc<JetSpace> {
        let mut monos: Vec<Vec<u8>> = Vec::new();
        for deg in 0..=degree {
            let mut cur = vec![0u8; nvars];
            gen_monos(nvars, deg, 0, &mut cur, &mut monos);
        }
        let index: HashMap<Vec<u8>, usize> =
            monos.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        let mono_deg: Vec<usize> =
            monos.iter().map(|m| m.iter().map(|&e| e as usize).sum()).collect();
        let mut mul_table = Vec::new();
        for i in 0..monos.len() {
            for j in 0..monos.len() {
                if mono_deg[i] + mono_deg[j] <= degree {
                    let prod: Vec<u8> = monos[i].iter().zip(&monos[j]).map(|(a, b)| a + b).collect();
                    mul_table.push((i as u32, j as u32, index[&prod] as u32));
                }
            }
        }
        let mut deriv = vec![Vec::new(); nvars];
        for (v, table) in deriv.iter_mut().enumerate() {
            for (i, m) in monos.iter().enumerate() {
                if m[v] > 0 {
                    let mut t = m.clone();
                    t[v] -= 1;
                    table.push((i as u32, index[&t] as u32, m[v] as f64));
                }
            }
        }
        Arc::new(JetSpace { nvars, degree, monos, index, mul_table, deriv })
    }

    /// Per-thread cached space of the given shape.
    pub fn shared(nvars: usize, degree: usize) -> Arc<JetSpace> {
        thread_local! {
            static CACHE: std::cell::RefCell<HashMap<(usize, usize), Arc<JetSpace>>> =
                std::cell::RefCell::new(HashMap::new());
        }
        CACHE.with(|c| {
            c.borrow_mut().entry((nvars, degree)).or_insert_with(|| JetSpace::new(nvars, degree)).clone()
        })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }
    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn len(&self) -> usize {
        self.monos.len()
    }
    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }
    pub fn monomials(&self) -> &[Vec<u8>] {
        &self.monos
    }
    pub fn index_of(&self, mono: &[u8]) -> Option<usize> {
        self.index.get(mono).copied()
    }
}

fn gen_monos(n: usize, left: usize, pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos + 1 == n {
        cur[pos] = left as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    if n == 0 {
        out.push(Vec::new());
        return;
    }
    for e in (0..=left).rev() {
        cur[pos] = e as u8;
        gen_monos(n, left - e, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// Truncated Taylor polynomial in `nvars` displacement variables.
///
/// Coefficient of monomial `δ^α` is `∂^α f / α!`. Constants carry no space so
/// they mix freely with jets of any shape.
#[derive(Clone)]
pub enum Jet {
    Const(f64),
    Var(Arc<JetSpace>, Vec<f64>),
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Jet::Const(c) => write!(f, "Jet::Const({c})"),
            Jet::Var(_, v) => write!(f, "Jet{:?}", v),
        }
    }
}

impl Jet {
    /// Independent variable `i` expanded about `value`.
    pub fn variable(space: &Arc<JetSpace>, i: usize, value: f64) -> Jet {
        let mut c = vec![0.0; space.len()];
        c[0] = value;
        if space.degree >= 1 {
            let mut m = vec![0u8; space.nvars];
            m[i] = 1;
            c[space.index[&m]] = 1.0;
        }
        Jet::Var(space.clone(), c)
    }

    /// All `n` coordinate variables about the point `x`.
    pub fn seed(x: &[f64], degree: usize) -> Vec<Jet> {
        let space = JetSpace::shared(x.len(), degree);
        x.iter().enumerate().map(|(i, &v)| Jet::variable(&space, i, v)).collect()
    }

    pub fn from_coeffs(space: &Arc<JetSpace>, coeffs: Vec<f64>) -> Jet {
        assert_eq!(coeffs.len(), space.len());
        Jet::Var(space.clone(), coeffs)
    }

    pub fn space(&self) -> Option<&Arc<JetSpace>> {
        match self {
            Jet::Const(_) => None,
            Jet::Var(s, _) => Some(s),
        }
    }

    /// Taylor coefficient of the monomial with exponents `mono`.
    pub fn coeff(&self, mono: &[u8]) -> f64 {
        match self {
            Jet::Const(c) => {
                if mono.iter().all(|&e| e == 0) {
                    *c
                } else {
                    0.0
                }
            }
            Jet::Var(s, v) => s.index_of(mono).map(|i| v[i]).unwrap_or(0.0),
        }
    }

    pub fn coeffs(&self) -> Option<&[f64]> {
        match self {
            Jet::Const(_) => None,
            Jet::Var(_, v) => Some(v),
        }
    }

    /// First partial derivative with respect to variable `i` at the expansion point.
    pub fn d1(&self, i: usize) -> f64 {
        match self {
            Jet::Const(_) => 0.0,
            Jet::Var(s, v) => {
                let mut m = vec![0u8; s.nvars];
                m[i] = 1;
                s.index_of(&m).map(|k| v[k]).unwrap_or(0.0)
            }
        }
    }

    /// Second partial derivative `∂_i ∂_j` at the expansion point.
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        match self {
            Jet::Const(_) => 0.0,
            Jet::Var(s, v) => {
                let mut m = vec![0u8; s.nvars];
                m[i] += 1;
                m[j] += 1;
                let c = s.index_of(&m).map(|k| v[k]).unwrap_or(0.0);
                if i == j {
                    2.0 * c
                } else {
                    c
                }
            }
        }
    }

    /// Partial derivative as a jet (top-degree information is lost).
    pub fn deriv(&self, var: usize) -> Jet {
        match self {
            Jet::Const(_) => Jet::Const(0.0),
            Jet::Var(s, v) => {
                let mut out = vec![0.0; v.len()];
                for &(src, dst, f) in &s.deriv[var] {
                    out[dst as usize] += f * v[src as usize];
                }
                Jet::Var(s.clone(), out)
            }
        }
    }

    /// Evaluate the polynomial at displacements `delta` (any scalar type).
    pub fn eval_poly<S: Scalar>(&self, delta: &[S]) -> S {
        match self {
            Jet::Const(c) => S::from(*c),
            Jet::Var(s, v) => {
                // powers[i][e] = delta_i^e
                let mut powers: Vec<Vec<S>> = Vec::with_capacity(s.nvars);
                for d in delta.iter().take(s.nvars) {
                    let mut p = vec![S::from(1.0)];
                    for e in 1..=s.degree {
                        let next = p[e - 1].clone() * d.clone();
                        p.push(next);
                    }
                    powers.push(p);
                }
                let mut acc = S::from(0.0);
                for (k, m) in s.monos.iter().enumerate() {
                    if v[k] == 0.0 {
                        continue;
                    }
                    let mut term = S::from(v[k]);
                    for (i, &e) in m.iter().enumerate() {
                        if e > 0 {
                            term = term * powers[i][e as usize].clone();
                        }
                    }
                    acc = acc + term;
                }
                acc
            }
        }
    }

    /// Maximum absolute coefficient (used for norms in tests).
    pub fn max_abs(&self) -> f64 {
        match self {
            Jet::Const(c) => c.abs(),
            Jet::Var(_, v) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    fn binary(a: &Jet, b: &Jet, fc: impl Fn(f64, f64) -> f64) -> Jet {
        match (a, b) {
            (Jet::Const(x), Jet::Const(y)) => Jet::Const(fc(*x, *y)),
            (Jet::Var(s, v), Jet::Const(y)) => {
                let mut out: Vec<f64> = v.iter().map(|&x| fc(x, 0.0)).collect();
                out[0] = fc(v[0], *y);
                Jet::Var(s.clone(), out)
            }
            (Jet::Const(x), Jet::Var(s, v)) => {
                let mut out: Vec<f64> = v.iter().map(|&y| fc(0.0, y)).collect();
                out[0] = fc(*x, v[0]);
                Jet::Var(s.clone(), out)
            }
            (Jet::Var(s, v), Jet::Var(s2, w)) => {
                debug_assert!(Arc::ptr_eq(s, s2) || (s.nvars == s2.nvars && s.degree == s2.degree));
                Jet::Var(s.clone(), v.iter().zip(w).map(|(&x, &y)| fc(x, y)).collect())
            }
        }
    }
}

impl From<f64> for Jet {
    fn from(c: f64) -> Jet {
        Jet::Const(c)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet::binary(&self, &o, |a, b| a + b)
    }
}
impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::binary(&self, &o, |a, b| a - b)
    }
}
impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        match (&self, &o) {
            (Jet::Const(x), _) => o * *x,
            (_, Jet::Const(y)) => self * *y,
            (Jet::Var(s, v), Jet::Var(_, w)) => {
                let mut out = vec![0.0; v.len()];
                for &(i, j, k) in &s.mul_table {
                    out[k as usize] += v[i as usize] * w[j as usize];
                }
                Jet::Var(s.clone(), out)
            }
        }
    }
}
impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        match o {
            Jet::Const(y) => self / y,
            _ => self * o.recip(),
        }
    }
}
impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}
impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        match self {
            Jet::Const(x) => Jet::Const(x + c),
            Jet::Var(s, mut v) => {
                v[0] += c;
                Jet::Var(s, v)
            }
        }
    }
}
impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, c: f64) -> Jet {
        self + (-c)
    }
}
impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        match self {
            Jet::Const(x) => Jet::Const(x * c),
            Jet::Var(s, mut v) => {
                v.iter_mut().for_each(|x| *x *= c);
                Jet::Var(s, v)
            }
        }
    }
}
impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, c: f64) -> Jet {
        self * (1.0 / c)
    }
}

impl Scalar for Jet {
    fn value(&self) -> f64 {
        match self {
            Jet::Const(c) => *c,
            Jet::Var(_, v) => v[0],
        }
    }
    fn degree(&self) -> usize {
        match self {
            Jet::Const(_) => 0,
            Jet::Var(s, _) => s.degree,
        }
    }
    fn compose(&self, taylor: &[f64]) -> Jet {
        match self {
            Jet::Const(_) => Jet::Const(taylor[0]),
            Jet::Var(s, v) => {
                let n = s.degree.min(taylor.len().saturating_sub(1));
                let mut delta = v.clone();
                delta[0] = 0.0;
                let delta = Jet::Var(s.clone(), delta);
                let mut acc = Jet::Const(taylor[n]);
                for k in (0..n).rev() {
                    acc = acc * delta.clone() + taylor[k];
                }
                match acc {
                    Jet::Const(c) => {
                        let mut out = vec![0.0; v.len()];
                        out[0] = c;
                        Jet::Var(s.clone(), out)
                    }
                    j => j,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_product() {
        let x = Jet::seed(&[0.3, -0.7], 3);
        let f = x[0].clone() * x[0].clone() * x[1].clone();
        assert!((f.value() - 0.09 * -0.7).abs() < 1e-15);
        assert!((f.d1(0) - 2.0 * 0.3 * -0.7).abs() < 1e-15);
        assert!((f.d1(1) - 0.09).abs() < 1e-15);
        assert!((f.d2(0, 0) - 2.0 * -0.7).abs() < 1e-14);
        assert!((f.d2(0, 1) - 0.6).abs() < 1e-14);
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let x = Jet::seed(&[0.8], 4);
        let a = 0.8f64;
        let s = x[0].sin();
        assert!((s.coeff(&[3]) + a.cos() / 6.0).abs() < 1e-14);
        let e = x[0].exp();
        assert!((e.coeff(&[4]) - a.exp() / 24.0).abs() < 1e-14);
        let l = x[0].ln();
        assert!((l.coeff(&[2]) + 1.0 / (2.0 * a * a)).abs() < 1e-14);
        let r = x[0].sqrt();
        assert!((r.d2(0, 0) + 0.25 * a.powf(-1.5)).abs() < 1e-13);
        let q = Jet::Const(1.0) / x[0].clone();
        assert!((q.d1(0) + 1.0 / (a * a)).abs() < 1e-13);
    }

    #[test]
    fn eval_poly_reproduces_polynomial() {
        let x = Jet::seed(&[0.0, 0.0], 3);
        let p = x[0].clone() * x[1].clone() * 2.0 + x[1].powi(3) + 1.5;
        let v = p.eval_poly(&[0.5, -0.25]);
        assert!((v - (2.0 * 0.5 * -0.25 + (-0.25f64).powi(3) + 1.5)).abs() < 1e-15);
    }

    #[test]
    fn deriv_lowers_degree() {
        let x = Jet::seed(&[1.0, 2.0], 3);
        let p = x[0].powi(3) * x[1].clone();
        let dp = p.deriv(0);
        assert!((dp.value() - 3.0 * 2.0).abs() < 1e-14);
        assert!((dp.d1(0) - 6.0 * 2.0).abs() < 1e-13);
    }
}
