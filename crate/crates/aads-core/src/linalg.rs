//! Small dense helpers over generic scalars and `f64`.

use crate::scalar::Scalar;
use nalgebra::DMatrix;

/// Row-major square matrix inverse by Gauss-Jordan with partial pivoting on
/// the value part. Returns `None` when a pivot vanishes.
pub fn inverse<S: Scalar>(a: &[S], n: usize) -> Option<Vec<S>> {
    let mut m: Vec<S> = a.to_vec();
    let mut inv: Vec<S> = (0..n * n)
        .map(|k| S::from(if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].value().abs();
        for r in col + 1..n {
            let v = m[r * n + col].value().abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return None;
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
                inv.swap(col * n + c, piv * n + c);
            }
        }
        let p = m[col * n + col].recip();
        for c in 0..n {
            m[col * n + c] = m[col * n + c].clone() * p.clone();
            inv[col * n + c] = inv[col * n + c].clone() * p.clone();
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col].clone();
            if f.value() == 0.0 && f.degree() == 0 {
                continue;
            }
            for c in 0..n {
                m[r * n + c] = m[r * n + c].clone() - f.clone() * m[col * n + c].clone();
                inv[r * n + c] = inv[r * n + c].clone() - f.clone() * inv[col * n + c].clone();
            }
        }
    }
    Some(inv)
}

/// Determinant by Gaussian elimination on values.
pub fn det(a: &[f64], n: usize) -> f64 {
    DMatrix::from_row_slice(n, n, a).determinant()
}

pub fn inverse_f64(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(n, n, a);
    m.try_inverse().map(|inv| {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = inv[(i, j)];
            }
        }
        out
    })
}

/// Solve `A x = b` (row-major `A`).
pub fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(n, n, a);
    let rhs = nalgebra::DVector::from_column_slice(b);
    m.lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

/// Eigenvalues of a symmetric matrix.
pub fn sym_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let m = DMatrix::from_row_slice(n, n, a);
    let m = (&m + m.transpose()) * 0.5;
    m.symmetric_eigen().eigenvalues.iter().copied().collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `g(u, v)` for a row-major metric.
pub fn quad(g: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g[i * n + j] * u[i] * v[j];
        }
    }
    s
}

pub fn mat_vec(a: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..a.len() / n).map(|i| (0..n).map(|j| a[i * n + j] * v[j]).sum()).collect()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Adjugate of a square matrix (cofactor transpose), valid for singular input.
pub fn adjugate(a: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    if n == 1 {
        out[0] = 1.0;
        return out;
    }
    let mut minor = vec![0.0; (n - 1) * (n - 1)];
    for i in 0..n {
        for j in 0..n {
            let mut k = 0;
            for r in 0..n {
                if r == i {
                    continue;
                }
                for c in 0..n {
                    if c == j {
                        continue;
                    }
                    minor[k] = a[r * n + c];
                    k += 1;
                }
            }
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            out[j * n + i] = sign * det(&minor, n - 1);
        }
    }
    out
}
