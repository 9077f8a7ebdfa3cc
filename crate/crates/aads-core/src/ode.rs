//! Dormand–Prince 5(4) with continuous extension and terminal event location.

use crate::error::{AadsError, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-12, atol: 1e-12, h0: 1e-3, h_min: 1e-14, max_steps: 2_000_000 }
    }
}

#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl Segment {
    fn eval(&self, t: f64) -> Vec<f64> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.r;
        (0..r1.len())
            .map(|i| r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i]))))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Reached,
    Event(usize),
    /// The right-hand side refused a state even with the smallest step.
    DomainExit,
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub ts: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    segments: Vec<Segment>,
    pub termination: Termination,
    pub message: Option<String>,
}

impl OdeSolution {
    pub fn t_first(&self) -> f64 {
        self.ts[0]
    }
    pub fn t_last(&self) -> f64 {
        *self.ts.last().unwrap()
    }
    pub fn y_last(&self) -> &[f64] {
        self.ys.last().unwrap()
    }

    /// Dense evaluation; `t` is clamped to the integrated range.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        if self.segments.is_empty() {
            return self.ys[0].clone();
        }
        let forward = self.t_last() >= self.t_first();
        let key = |s: &Segment| if forward { s.t0 } else { -s.t0 };
        let tk = if forward { t } else { -t };
        let idx = self.segments.partition_point(|s| key(s) <= tk).saturating_sub(1);
        let seg = &self.segments[idx.min(self.segments.len() - 1)];
        let (lo, hi) = (seg.t0.min(seg.t0 + seg.h), seg.t0.max(seg.t0 + seg.h));
        if t < lo && idx == 0 || t > hi && idx + 1 == self.segments.len() {
            return seg.eval(t.clamp(lo, hi));
        }
        seg.eval(t)
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

pub type Event<'a> = &'a (dyn Fn(f64, &[f64]) -> f64 + Sync);

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction). Terminal
/// events fire when an event function passes from positive to non-positive and
/// are located on the continuous extension to ~1e−14.
pub fn integrate<F>(f: F, t0: f64, y0: &[f64], t_end: f64, opts: &OdeOptions, events: &[Event]) -> Result<OdeSolution>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let n = y0.len();
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut sol = OdeSolution {
        ts: vec![t0],
        ys: vec![y0.to_vec()],
        segments: Vec::new(),
        termination: Termination::Reached,
        message: None,
    };
    if t_end == t0 {
        return Ok(sol);
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = f(t, &y)?;
    let mut h = opts.h0.min((t_end - t0).abs()) * dir;
    let mut g_prev: Vec<f64> = events.iter().map(|e| e(t, &y)).collect();
    let mut steps = 0usize;
    let mut ks: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut reject_streak = 0usize;
    loop {
        steps += 1;
        if steps > opts.max_steps {
            return Err(AadsError::Singularity(format!("step budget exhausted at t = {t}")));
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        ks[0].clone_from(&k1);
        let mut ok = true;
        let mut stage_err = None;
        for s in 1..7 {
            let ys: Vec<f64> = (0..n)
                .map(|i| {
                    let mut acc = y[i];
                    for j in 0..s {
                        acc += h * A[s][j] * ks[j][i];
                    }
                    acc
                })
                .collect();
            match f(t + C[s] * h, &ys) {
                Ok(v) if v.iter().all(|x| x.is_finite()) => ks[s] = v,
                Ok(_) => {
                    ok = false;
                    stage_err = Some("non-finite derivative".to_string());
                    break;
                }
                Err(e) => {
                    ok = false;
                    stage_err = Some(e.to_string());
                    break;
                }
            }
        }
        if !ok {
            h *= 0.25;
            reject_streak += 1;
            if h.abs() < opts.h_min * (1.0 + t.abs()) || reject_streak > 200 {
                sol.termination = Termination::DomainExit;
                sol.message = stage_err;
                return Ok(sol);
            }
            continue;
        }
        let y1: Vec<f64> = (0..n)
            .map(|i| {
                let mut acc = y[i];
                for j in 0..6 {
                    acc += h * A[6][j] * ks[j][i];
                }
                acc
            })
            .collect();
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * ks[j][i];
            }
            e *= h;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() || err > 1.0 {
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.2) } else { 0.2 };
            h *= fac;
            reject_streak += 1;
            if h.abs() < opts.h_min * (1.0 + t.abs()) {
                return Err(AadsError::Singularity(format!(
                    "step size underflow at t = {t}; last good state {:?}",
                    y
                )));
            }
            continue;
        }
        reject_streak = 0;
        let ydiff: Vec<f64> = (0..n).map(|i| y1[i] - y[i]).collect();
        let bspl: Vec<f64> = (0..n).map(|i| h * ks[0][i] - ydiff[i]).collect();
        let r4: Vec<f64> = (0..n).map(|i| ydiff[i] - h * ks[6][i] - bspl[i]).collect();
        let r5: Vec<f64> = (0..n).map(|i| h * (0..7).map(|j| D[j] * ks[j][i]).sum::<f64>()).collect();
        let seg = Segment { t0: t, h, r: [y.clone(), ydiff, bspl, r4, r5] };
        let t1 = t + h;
        // events
        let g_new: Vec<f64> = events.iter().map(|e| e(t1, &y1)).collect();
        let mut hit: Option<(usize, f64)> = None;
        for (i, ev) in events.iter().enumerate() {
            let (a, b) = (g_prev[i], g_new[i]);
            if a > 0.0 && b.is_finite() && b <= 0.0 {
                let root = locate(|s| ev(s, &seg.eval(s)), t, t1, a, b);
                if hit.map(|(_, r)| (root - r) * dir < 0.0).unwrap_or(true) {
                    hit = Some((i, root));
                }
            }
        }
        sol.segments.push(seg);
        if let Some((i, te)) = hit {
            let ye = sol.segments.last().unwrap().eval(te);
            sol.ts.push(te);
            sol.ys.push(ye);
            sol.termination = Termination::Event(i);
            return Ok(sol);
        }
        t = t1;
        y = y1;
        sol.ts.push(t);
        sol.ys.push(y.clone());
        g_prev = g_new;
        if (t - t_end) * dir >= 0.0 {
            return Ok(sol);
        }
        k1 = ks[6].clone();
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
    }
}

/// Illinois false-position on a bracketing interval.
fn locate(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut ga: f64, mut gb: f64) -> f64 {
    if gb == 0.0 {
        return b;
    }
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * gb - b * ga) / (gb - ga);
        let gc = g(c);
        if gc == 0.0 || (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            return c;
        }
        if gc.signum() == gb.signum() {
            b = c;
            gb = gc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            ga = gc;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_is_accurate() {
        let sol = integrate(|_, y| Ok(vec![y[1], -y[0]]), 0.0, &[0.0, 1.0], 10.0, &OdeOptions::default(), &[])
            .unwrap();
        assert!((sol.y_last()[0] - 10f64.sin()).abs() < 1e-9);
        let mid = sol.eval(3.3);
        assert!((mid[0] - 3.3f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn event_is_located() {
        let ev = |_t: f64, y: &[f64]| 0.5 - y[0];
        let sol = integrate(|_, y| Ok(vec![y[1], -y[0]]), 0.0, &[0.0, 1.0], 10.0, &OdeOptions::default(), &[&ev])
            .unwrap();
        assert_eq!(sol.termination, Termination::Event(0));
        assert!((sol.t_last() - (0.5f64).asin()).abs() < 1e-12);
    }

    #[test]
    fn backward_integration() {
        let sol = integrate(|_, y| Ok(vec![y[0]]), 1.0, &[1.0], 0.0, &OdeOptions::default(), &[]).unwrap();
        assert!((sol.y_last()[0] - (-1f64).exp()).abs() < 1e-11);
        assert!((sol.eval(0.5)[0] - (-0.5f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn domain_exit_is_reported() {
        let rhs = |_t: f64, y: &[f64]| {
            if y[0] > 1.0 {
                Err(AadsError::Domain("x > 1".into()))
            } else {
                Ok(vec![1.0])
            }
        };
        let sol = integrate(rhs, 0.0, &[0.0], 5.0, &OdeOptions::default(), &[]).unwrap();
        assert_eq!(sol.termination, Termination::DomainExit);
        assert!(sol.y_last()[0] <= 1.0 && sol.y_last()[0] > 0.99);
    }
}
