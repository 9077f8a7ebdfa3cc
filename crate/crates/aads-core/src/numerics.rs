//! Quadrature, root bracketing and extrapolation helpers.

use crate::error::{AadsError, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss–Legendre integral of `f` over [a, b].
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, nodes: usize) -> f64 {
    let (x, w) = gauss_legendre(nodes);
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * f(lo + 0.5 * h * (xi + 1.0));
        }
    }
    0.5 * h * s
}

/// Bisection on a bracketing interval.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(AadsError::Domain(format!("no sign change on [{a}, {b}]")));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a).abs() < tol {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Richardson table for samples `f(h_k)` with `h_{k+1} = h_k / ratio` and
/// leading error order `p`, `p+1`, ...; returns the most refined value and the
/// difference to the previous diagonal entry.
pub fn richardson(values: &[f64], ratio: f64, p: i32) -> (f64, f64) {
    let mut row = values.to_vec();
    let mut err = f64::INFINITY;
    let mut order = p;
    while row.len() > 1 {
        let fac = ratio.powi(order);
        let next: Vec<f64> = row.windows(2).map(|w| (fac * w[1] - w[0]) / (fac - 1.0)).collect();
        err = (next[next.len() - 1] - row[row.len() - 1]).abs();
        row = next;
        order += 1;
    }
    (row[0], err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let v = integrate(|x| x.powi(9) + 3.0 * x * x, 0.0, 2.0, 1, 5);
        assert!((v - (102.4 + 8.0)).abs() < 1e-12);
    }

    #[test]
    fn richardson_removes_linear_error() {
        let f = |h: f64| 2.0 + 0.3 * h + 0.1 * h * h;
        let v: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&h| f(h)).collect();
        let (x, _) = richardson(&v, 2.0, 1);
        assert!((x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }
}
