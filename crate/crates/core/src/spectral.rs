//! Spectral representations of coefficient functions on an arc-length grid:
//! trigonometric on closed curves, Chebyshev (Lobatto nodes) on open arcs.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SGrid {
    Periodic { n: usize, s0: f64, period: f64 },
    Chebyshev { n: usize, a: f64, b: f64 },
}

impl SGrid {
    pub fn len(&self) -> usize {
        match *self {
            SGrid::Periodic { n, .. } | SGrid::Chebyshev { n, .. } => n,
        }
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn nodes(&self) -> Vec<f64> {
        match *self {
            SGrid::Periodic { n, s0, period } => (0..n).map(|j| s0 + period * j as f64 / n as f64).collect(),
            SGrid::Chebyshev { n, a, b } => (0..n)
                .map(|j| {
                    let x = (PI * j as f64 / (n - 1) as f64).cos();
                    0.5 * (a + b) - 0.5 * (b - a) * x
                })
                .collect(),
        }
    }
    /// Compact interval the grid represents.
    pub fn span(&self) -> (f64, f64) {
        match *self {
            SGrid::Periodic { s0, period, .. } => (s0, s0 + period),
            SGrid::Chebyshev { a, b, .. } => (a, b),
        }
    }
    pub fn fit(&self, values: &[f64]) -> Spectral {
        assert_eq!(values.len(), self.len());
        match *self {
            SGrid::Periodic { n, s0, period } => {
                let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
                FftPlanner::new().plan_fft_forward(n).process(&mut buf);
                let coeffs = buf.iter().map(|c| c / n as f64).collect();
                Spectral::Trig { s0, period, coeffs }
            }
            SGrid::Chebyshev { n, a, b } => {
                // values are ordered by increasing s, i.e. x_j = -cos(pi j/(n-1))
                let m = n - 1;
                let mut c = vec![0.0; n];
                for (k, ck) in c.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (j, &v) in values.iter().enumerate() {
                        let x = -(PI * j as f64 / m as f64).cos();
                        let wj = if j == 0 || j == m { 0.5 } else { 1.0 };
                        acc += wj * v * (k as f64 * x.acos()).cos();
                    }
                    let wk = if k == 0 || k == m { 1.0 } else { 2.0 };
                    *ck = wk * acc / m as f64;
                }
                Spectral::Cheb { a, b, coeffs: c }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Spectral {
    Trig { s0: f64, period: f64, coeffs: Vec<Complex<f64>> },
    Cheb { a: f64, b: f64, coeffs: Vec<f64> },
}

fn wavenumber(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

impl Spectral {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Spectral::Trig { s0, period, coeffs } => {
                let n = coeffs.len();
                let th = 2.0 * PI * (s - s0) / period;
                let step = Complex::from_polar(1.0, th);
                let mut e = Complex::new(1.0, 0.0);
                let mut acc = coeffs[0].re;
                for c in coeffs.iter().take(n.div_ceil(2)).skip(1) {
                    e *= step;
                    acc += 2.0 * (c * e).re;
                }
                if n % 2 == 0 {
                    acc += (coeffs[n / 2] * Complex::from_polar(1.0, (n / 2) as f64 * th)).re;
                }
                acc
            }
            Spectral::Cheb { a, b, coeffs } => {
                let x = (2.0 * s - a - b) / (b - a);
                let (mut b1, mut b2) = (0.0, 0.0);
                for &c in coeffs.iter().skip(1).rev() {
                    let t = 2.0 * x * b1 - b2 + c;
                    b2 = b1;
                    b1 = t;
                }
                x * b1 - b2 + coeffs[0]
            }
        }
    }

    /// Zero the coefficients below `rel` times the largest one, so that
    /// repeated differentiation does not amplify roundoff.
    pub fn chopped(mut self, rel: f64) -> Spectral {
        match &mut self {
            Spectral::Trig { coeffs, .. } => {
                let m = coeffs.iter().fold(0.0f64, |a, c| a.max(c.norm()));
                for c in coeffs.iter_mut() {
                    if c.norm() < rel * m {
                        *c = Complex::new(0.0, 0.0);
                    }
                }
            }
            Spectral::Cheb { coeffs, .. } => {
                let m = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
                for c in coeffs.iter_mut() {
                    if c.abs() < rel * m {
                        *c = 0.0;
                    }
                }
            }
        }
        self
    }

    pub fn derivative(&self) -> Spectral {
        match self {
            Spectral::Trig { s0, period, coeffs } => {
                let n = coeffs.len();
                let f = 2.0 * PI / period;
                let c = (0..n)
                    .map(|k| {
                        if n % 2 == 0 && k == n / 2 {
                            Complex::new(0.0, 0.0)
                        } else {
                            coeffs[k] * Complex::new(0.0, f * wavenumber(k, n))
                        }
                    })
                    .collect();
                Spectral::Trig { s0: *s0, period: *period, coeffs: c }
            }
            Spectral::Cheb { a, b, coeffs } => {
                let n = coeffs.len();
                let mut d = vec![0.0; n + 1];
                for k in (0..n - 1).rev() {
                    d[k] = d[k + 2] + 2.0 * (k + 1) as f64 * coeffs[k + 1];
                }
                d[0] *= 0.5;
                d.truncate(n);
                let scale = 2.0 / (b - a);
                Spectral::Cheb { a: *a, b: *b, coeffs: d.iter().map(|v| v * scale).collect() }
            }
        }
    }

    /// Antiderivative vanishing at `s_ref`. For trigonometric series the mean
    /// is dropped and returned separately (a periodic antiderivative exists
    /// only for zero mean).
    pub fn antiderivative(&self, s_ref: f64) -> (Spectral, f64) {
        let (mut out, mean) = match self {
            Spectral::Trig { s0, period, coeffs } => {
                let n = coeffs.len();
                let f = 2.0 * PI / period;
                let c = (0..n)
                    .map(|k| {
                        if k == 0 || (n % 2 == 0 && k == n / 2) {
                            Complex::new(0.0, 0.0)
                        } else {
                            coeffs[k] / Complex::new(0.0, f * wavenumber(k, n))
                        }
                    })
                    .collect();
                (Spectral::Trig { s0: *s0, period: *period, coeffs: c }, coeffs[0].re)
            }
            Spectral::Cheb { a, b, coeffs } => {
                let n = coeffs.len();
                let mut c = vec![0.0; n + 1];
                let cc = |k: usize| if k < n { coeffs[k] } else { 0.0 };
                for k in 1..=n {
                    let prev = if k == 1 { 2.0 * cc(0) } else { cc(k - 1) };
                    c[k] = (prev - cc(k + 1)) / (2.0 * k as f64);
                }
                let scale = 0.5 * (b - a);
                (Spectral::Cheb { a: *a, b: *b, coeffs: c.iter().map(|v| v * scale).collect() }, 0.0)
            }
        };
        let shift = out.eval(s_ref);
        match &mut out {
            Spectral::Trig { coeffs, .. } => coeffs[0].re -= shift,
            Spectral::Cheb { coeffs, .. } => coeffs[0] -= shift,
        }
        (out, mean)
    }
}

/// Chebyshev interpolation of samples on first-kind nodes of `[-rho, rho]`,
/// returned as monomial Taylor coefficients up to `order`. Trailing
/// coefficients below the noise floor are discarded before conversion.
pub fn cheb_nodes(m: usize, rho: f64) -> Vec<f64> {
    (0..m).map(|j| rho * (PI * (j as f64 + 0.5) / m as f64).cos()).collect()
}

pub fn monomial_from_samples(samples: &[f64], rho: f64, order: usize) -> Vec<f64> {
    let m = samples.len();
    let mut a = vec![0.0; m];
    for (k, ak) in a.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &v) in samples.iter().enumerate() {
            acc += v * (PI * k as f64 * (j as f64 + 0.5) / m as f64).cos();
        }
        *ak = acc * if k == 0 { 1.0 } else { 2.0 } / m as f64;
    }
    let amax = a.iter().fold(0.0f64, |x, v| x.max(v.abs()));
    let floor = 4.0 * f64::EPSILON * amax;
    let mut last = m;
    while last > 1 && a[last - 1].abs() <= floor {
        last -= 1;
    }
    // monomial coefficients of T_k by the three-term recurrence
    let deg = last.max(order + 1);
    let mut out = vec![0.0; order + 1];
    let mut t_prev = vec![0.0; deg + 1];
    let mut t_cur = vec![0.0; deg + 1];
    t_prev[0] = 1.0;
    t_cur[1] = 1.0;
    for (k, &ak) in a.iter().enumerate().take(last) {
        let tk: &Vec<f64> = if k == 0 { &t_prev } else { &t_cur };
        for (i, oi) in out.iter_mut().enumerate() {
            *oi += ak * tk[i];
        }
        if k >= 1 {
            let mut next = vec![0.0; deg + 1];
            for i in 0..deg {
                next[i + 1] += 2.0 * t_cur[i];
            }
            for i in 0..=deg {
                next[i] -= t_prev[i];
            }
            t_prev = std::mem::replace(&mut t_cur, next);
        }
    }
    for (i, oi) in out.iter_mut().enumerate() {
        *oi /= rho.powi(i as i32);
    }
    out
}
