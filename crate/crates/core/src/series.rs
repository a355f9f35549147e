//! Asymptotic first integral of the billiard map near the boundary.
//!
//! The recursion works on the lifted map `F~(s, z)`, `z = sqrt(y)`:
//!
//! * `g_1 = w^{2/3}`, `w = 2 sqrt 2 / kappa`;
//! * `g_n` solves `g_n' w - (2n/3) w' g_n = -b`, where `b` is the
//!   `z^{2n+1}` coefficient of `G_{n-1} o F~`, via the integrating factor
//!   `w^{-2n/3}`;
//! * `t = G_N + G_N o F~` (even part), which is invariant to order `z^{2N+1}`;
//! * `h = v(t)` with `v(t) = ((3/2) int_0^t sqrt(p) psi(p) dp)^{2/3}`, where
//!   `sqrt(t) psi(t)` is the Hamiltonian-time advance of one step along the
//!   level sets of `t`.
//!
//! Jets of `F~` come from power-series arithmetic on the local expansion of
//! the curve (sampled curves fall back to Chebyshev interpolation in `z`).
//! Compositions `G o F~` are expanded with the `s`-derivatives of the
//! spectral coefficient interpolants.

use crate::billiard::Billiard;
use crate::curve::ConvexCurve;
use crate::error::{Error, Result};
use crate::numeric::gl_panel;
use crate::spectral::{cheb_nodes, monomial_from_samples, SGrid, Spectral};
use crate::taylor::Taylor;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const MAX_ORDER: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig {
    pub order: usize,
    /// Arc-length grid size.
    pub grid_n: usize,
    /// Half-width of the `z` stencil for sampled-curve jets.
    pub z_radius: f64,
    /// Number of Chebyshev nodes in `z`.
    pub z_nodes: usize,
    /// Compact sub-arc for open curves; ignored on closed ones.
    pub sub_arc: Option<(f64, f64)>,
    /// Upper `y` used to fit the drift profile.
    pub profile_y_max: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig { order: 3, grid_n: 256, z_radius: 0.25, z_nodes: 32, sub_arc: None, profile_y_max: 1e-2 }
    }
}

/// Taylor coefficients in `z` of the lifted step at each grid point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JetTable {
    pub s: Vec<f64>,
    pub rho: Vec<f64>,
    /// Coefficients of `s' - s`.
    pub ds: Vec<Vec<f64>>,
    /// Coefficients of `z'`.
    pub dz: Vec<Vec<f64>>,
    /// Coefficient disagreement between two stencil widths, per grid point
    /// (zero for series-arithmetic jets).
    pub disagreement: Vec<f64>,
}

impl JetTable {
    /// `q(s)` in `z' = z + (q/2) z^2 + ...`.
    pub fn q(&self) -> Vec<f64> {
        self.dz.iter().map(|c| 2.0 * c[2]).collect()
    }
}

fn lifted_images(b: &Billiard, s: f64, zs: &[f64]) -> Result<Vec<(f64, f64)>> {
    zs.iter().map(|&z| b.step_sz(s, z)).collect()
}

fn fit_pair(images: &[(f64, f64)], s: f64, rho: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let a: Vec<f64> = images.iter().map(|p| p.0 - s).collect();
    let c: Vec<f64> = images.iter().map(|p| p.1).collect();
    (monomial_from_samples(&a, rho, order), monomial_from_samples(&c, rho, order))
}

/// Jets of the lifted step on the grid nodes. Analytic curves use series
/// arithmetic; sampled curves interpolate on a symmetric `z` stencil, with a
/// second stencil of width `0.7 rho` measuring the extraction error.
pub fn compute_jets(curve: &ConvexCurve, nodes: &[f64], order: usize, cfg: &SeriesConfig) -> Result<JetTable> {
    let b = Billiard::new(curve);
    let rows: Vec<Result<(f64, Vec<f64>, Vec<f64>, f64)>> = nodes
        .par_iter()
        .map(|&s| {
            if let Some((ds, dz)) = b.step_jet(s, order)? {
                return Ok((0.0, ds.0, dz.0, 0.0));
            }
            let w = curve.w(s)?;
            let mut rho = cfg.z_radius;
            if !curve.is_closed() {
                // keep the stencil's chords on the arc
                let room = s.min(curve.length() - s);
                rho = rho.min(0.8 * room / w);
            }
            let images = lifted_images(&b, s, &cheb_nodes(cfg.z_nodes, rho))?;
            let (mut ds, mut dz) = fit_pair(&images, s, rho, order);
            let rho2 = 0.7 * rho;
            let images2 = lifted_images(&b, s, &cheb_nodes(cfg.z_nodes, rho2))?;
            let (ds2, dz2) = fit_pair(&images2, s, rho2, order);
            let mut dis: f64 = 0.0;
            for k in 0..=order.min(5) {
                dis = dis.max((ds[k] - ds2[k]).abs() / (1.0 + ds[k].abs()));
                dis = dis.max((dz[k] - dz2[k]).abs() / (1.0 + dz[k].abs()));
            }
            ds[0] = 0.0;
            dz[0] = 0.0;
            Ok((rho, ds, dz, dis))
        })
        .collect();
    let mut table = JetTable { s: nodes.to_vec(), rho: vec![], ds: vec![], dz: vec![], disagreement: vec![] };
    for (r, &s) in rows.into_iter().zip(nodes) {
        let (rho, ds, dz, dis) = r?;
        if dis > 1e-3 {
            return Err(Error::IllConditioned { s, disagreement: dis });
        }
        table.rho.push(rho);
        table.ds.push(ds);
        table.dz.push(dz);
        table.disagreement.push(dis);
    }
    Ok(table)
}

/// `z`-expansion of `sum_k g_k(s') z'^{2k}` at one grid point, from the
/// `s`-derivatives `dg[k][m]` of the coefficients.
fn compose_levels(dg: &[Vec<Spectral>], s: f64, ds: &[f64], dz: &[f64]) -> Vec<f64> {
    let order = ds.len() - 1;
    let a = Taylor(ds.to_vec());
    let z = Taylor(dz.to_vec());
    let z2 = z.mul(&z);
    let mut acc = Taylor::zero(order);
    let mut zp = z2.clone();
    for derivs in dg {
        let mut fact = 1.0;
        let mut local = Taylor::zero(order);
        for (m, d) in derivs.iter().enumerate() {
            if m > 0 {
                fact *= m as f64;
            }
            local.0[m] = d.eval(s) / fact;
        }
        acc = acc.add(&Taylor::compose_into(&local, &a).mul(&zp));
        zp = zp.mul(&z2);
    }
    acc.0
}

const CHOP: f64 = 32.0 * f64::EPSILON;

fn derivative_ladder(f: &Spectral, m: usize) -> Vec<Spectral> {
    let mut out = vec![f.clone().chopped(CHOP)];
    for _ in 0..m {
        let next = out.last().unwrap().derivative();
        out.push(next);
    }
    out
}

/// Closed-form solution of `g' w - (2k/3) w' g = -b` with `g(s_ref) = C w(s_ref)^{2k/3}`.
/// Returns the solution on the grid and the mean of the integrand, which must
/// vanish for a periodic solution to exist.
pub fn solve_coefficient_ode(grid: &SGrid, k: usize, w: &[f64], b: &[f64], c: f64) -> (Vec<f64>, f64) {
    let e = 2.0 * k as f64 / 3.0;
    let integrand: Vec<f64> = w.iter().zip(b).map(|(wi, bi)| bi * wi.powf(-e - 1.0)).collect();
    let (anti, mean) = grid.fit(&integrand).antiderivative(grid.span().0);
    let g = grid
        .nodes()
        .iter()
        .zip(w)
        .map(|(&s, wi)| wi.powf(e) * (c - anti.eval(s)))
        .collect();
    (g, mean)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SeriesDiagnostics {
    pub jet_disagreement: f64,
    /// Largest odd `z`-coefficient (orders `<= 2N+1`) of `G_N + G_N o F~`.
    pub odd_residual: f64,
    /// Means of the periodic solvability integrands, per order.
    pub solvability: Vec<f64>,
    /// Max ODE residual relative to `max |b|`, per order.
    pub ode_residual: Vec<f64>,
    /// Relative spread of the drift profile across launch points.
    pub profile_spread: f64,
}

#[derive(Clone, Debug)]
pub struct InvariantSeries {
    pub order: usize,
    pub grid: SGrid,
    pub s: Vec<f64>,
    pub w: Vec<f64>,
    pub g: Vec<Vec<f64>>,
    pub t: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    /// Free constants of the recursion.
    pub constants: Vec<f64>,
    /// Taylor coefficients of `psi` in the drift profile `xi(t) = sqrt(t) psi(t)`.
    pub psi: Vec<f64>,
    /// Taylor coefficients of the renormalizing function `v`, starting at `t^1`.
    pub v: Vec<f64>,
    pub diagnostics: SeriesDiagnostics,
    pub jets: JetTable,
    closed: bool,
    t_fn: Vec<Spectral>,
    h_fn: Vec<Spectral>,
    h_ds: Vec<Spectral>,
}

fn poly_eval(c: &[f64], y: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ck| acc * y + ck)
}

/// Truncated product of power series (coefficients from `y^0`).
fn series_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for (i, ai) in a.iter().enumerate().take(n + 1) {
        for (j, bj) in b.iter().enumerate().take(n + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// `p^alpha` for a series with `p[0] > 0`.
fn series_pow(p: &[f64], alpha: f64, n: usize) -> Vec<f64> {
    let mut q = vec![0.0; n + 1];
    q[0] = p[0].powf(alpha);
    for m in 1..=n {
        let mut acc = 0.0;
        for k in 1..=m.min(p.len() - 1) {
            acc += (alpha * k as f64 - (m - k) as f64) * p[k] * q[m - k];
        }
        q[m] = acc / (m as f64 * p[0]);
    }
    q
}

impl InvariantSeries {
    pub fn build(curve: &ConvexCurve, cfg: &SeriesConfig) -> Result<Self> {
        let n_ord = cfg.order;
        if n_ord == 0 {
            return Err(Error::Validation("series order must be at least 1".into()));
        }
        if n_ord > MAX_ORDER {
            return Err(Error::OrderTooHigh(n_ord));
        }
        let grid = if curve.is_closed() {
            SGrid::Periodic { n: cfg.grid_n, s0: 0.0, period: curve.length() }
        } else {
            let (a, b) = cfg.sub_arc.unwrap_or_else(|| {
                let l = curve.length();
                (0.1 * l, 0.9 * l)
            });
            if !(a >= 0.0 && b <= curve.length() && b > a) {
                return Err(Error::Validation(format!("sub-arc ({a}, {b}) not inside the curve")));
            }
            SGrid::Chebyshev { n: cfg.grid_n.min(129), a, b }
        };
        let s = grid.nodes();
        let jet_order = 2 * n_ord + 1;
        let jets = compute_jets(curve, &s, jet_order, cfg)?;
        let w: Vec<f64> = s.iter().map(|&si| curve.w(si)).collect::<Result<_>>()?;
        let w_fn = grid.fit(&w);
        let wp: Vec<f64> = s.iter().map(|&si| w_fn.derivative().eval(si)).collect();

        let mut diag = SeriesDiagnostics {
            jet_disagreement: jets.disagreement.iter().fold(0.0, |a: f64, b| a.max(*b)),
            ..Default::default()
        };
        let mut g: Vec<Vec<f64>> = vec![w.iter().map(|wi| wi.powf(2.0 / 3.0)).collect()];
        let mut g_fn: Vec<Spectral> = vec![grid.fit(&g[0])];
        let mut constants = vec![1.0];
        let mut dg: Vec<Vec<Spectral>> = vec![derivative_ladder(&g_fn[0], jet_order)];
        let composite = |dg: &[Vec<Spectral>]| -> Vec<Vec<f64>> {
            (0..s.len())
                .into_par_iter()
                .map(|i| compose_levels(dg, s[i], &jets.ds[i], &jets.dz[i]))
                .collect()
        };
        for n in 2..=n_ord {
            let comp = composite(&dg);
            let b: Vec<f64> = comp.iter().map(|c| c[2 * n + 1]).collect();
            let (gn, mean) = solve_coefficient_ode(&grid, n, &w, &b, 0.0);
            let gn_fn = grid.fit(&gn);
            let d = gn_fn.derivative();
            let bmax = b.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12 * w[0].powf(2.0 * n as f64 / 3.0));
            let mut res: f64 = 0.0;
            for i in 0..s.len() {
                let r = d.eval(s[i]) * w[i] - 2.0 * n as f64 / 3.0 * wp[i] * gn[i] + b[i];
                res = res.max(r.abs());
            }
            diag.solvability.push(mean);
            diag.ode_residual.push(res / bmax);
            dg.push(derivative_ladder(&gn_fn, jet_order));
            g.push(gn);
            g_fn.push(gn_fn);
            constants.push(0.0);
        }

        let comp = composite(&dg);
        let mut t = vec![vec![0.0; s.len()]; n_ord];
        for (i, c) in comp.iter().enumerate() {
            for k in 1..=n_ord {
                t[k - 1][i] = g[k - 1][i] + c[2 * k];
            }
            let scale = t[0][i].abs();
            for k in 1..=n_ord {
                diag.odd_residual = diag.odd_residual.max(c[2 * k + 1].abs() / scale);
            }
        }
        let t_fn: Vec<Spectral> = t.iter().map(|tk| grid.fit(tk)).collect();

        let mut series = InvariantSeries {
            order: n_ord,
            grid: grid.clone(),
            s: s.clone(),
            w,
            g,
            t,
            h: vec![],
            constants,
            psi: vec![],
            v: vec![],
            diagnostics: diag,
            jets,
            closed: curve.is_closed(),
            t_fn,
            h_fn: vec![],
            h_ds: vec![],
        };
        series.renormalize(curve, cfg)?;
        Ok(series)
    }

    /// Invariant from the symmetrized series, `T(s, y) = sum t_k(s) y^k`.
    pub fn t_value(&self, s: f64, y: f64) -> f64 {
        let c: Vec<f64> = std::iter::once(0.0).chain(self.t_fn.iter().map(|f| f.eval(s))).collect();
        poly_eval(&c, y)
    }

    fn t_coeffs(&self, s: f64) -> Vec<f64> {
        std::iter::once(0.0).chain(self.t_fn.iter().map(|f| f.eval(s))).collect()
    }

    /// Solve `T(s, y) = c` for `y` by Newton.
    fn t_level(&self, s: f64, c: f64) -> f64 {
        let co = self.t_coeffs(s);
        let dco: Vec<f64> = (1..co.len()).map(|k| k as f64 * co[k]).collect();
        let mut y = c / co[1];
        for _ in 0..50 {
            let dy = (poly_eval(&co, y) - c) / poly_eval(&dco, y);
            y -= dy;
            if dy.abs() <= 1e-16 * y.abs() {
                break;
            }
        }
        y
    }

    /// Hamiltonian-time advance of one step along the level `T = c`.
    fn drift(&self, b: &Billiard, s: f64, c: f64) -> Result<f64> {
        let y0 = self.t_level(s, c);
        let (s1, _) = b.step_sy(s, y0)?;
        let f = |sig: f64| {
            let co = self.t_coeffs(sig);
            let y = self.t_level(sig, c);
            let d: f64 = (1..co.len()).map(|k| k as f64 * co[k] * y.powi(k as i32 - 1)).sum();
            1.0 / d
        };
        Ok(gl_panel(f, s, s1))
    }

    fn renormalize(&mut self, curve: &ConvexCurve, cfg: &SeriesConfig) -> Result<()> {
        let n = self.order;
        let b = Billiard::new(curve);
        let (lo, hi) = self.grid.span();
        let starts: Vec<f64> = (0..6).map(|i| lo + (hi - lo) * (0.1 + 0.15 * i as f64)).collect();
        let t1_mean = self.t[0].iter().sum::<f64>() / self.t[0].len() as f64;
        let c_max = t1_mean * cfg.profile_y_max;
        let deg = n + 1;
        let m = 2 * (deg + 1);
        let cs: Vec<f64> = (0..m)
            .map(|j| 0.5 * c_max * (1.0 - (std::f64::consts::PI * (j as f64 + 0.5) / m as f64).cos()))
            .collect();
        let mut psi_vals = Vec::with_capacity(m);
        let mut spread: f64 = 0.0;
        for &c in &cs {
            let xs: Vec<f64> = starts
                .iter()
                .map(|&s0| self.drift(&b, s0, c))
                .collect::<Result<_>>()
                .map_err(|e| Error::ProfileNoise(format!("drift evaluation failed: {e}")))?;
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let sp = xs.iter().fold(0.0f64, |a, x| a.max((x - mean).abs())) / mean;
            spread = spread.max(sp);
            psi_vals.push(mean / c.sqrt());
        }
        if !(spread < 5e-2) {
            return Err(Error::ProfileNoise(format!("drift varies by {spread:e} along levels")));
        }
        self.diagnostics.profile_spread = spread;
        // least squares in the scaled variable c / c_max
        let a = DMatrix::from_fn(m, deg + 1, |i, j| (cs[i] / c_max).powi(j as i32));
        let rhs = DVector::from_vec(psi_vals);
        let sol = a
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::ProfileNoise(e.to_string()))?;
        self.psi = (0..=deg).map(|j| sol[j] / c_max.powi(j as i32)).collect();
        if !(self.psi[0] > 0.0) {
            return Err(Error::ProfileNoise("psi(0) is not positive".into()));
        }
        // v(t) = t * P(t)^{2/3}, P(t) = sum psi_j (3/2)/(j + 3/2) t^j
        let p: Vec<f64> = self.psi.iter().enumerate().map(|(j, pj)| pj * 1.5 / (j as f64 + 1.5)).collect();
        let q = series_pow(&p, 2.0 / 3.0, n);
        self.v = q[..n].to_vec();

        let mut h = vec![vec![0.0; self.s.len()]; n];
        for i in 0..self.s.len() {
            let tser: Vec<f64> = std::iter::once(0.0).chain((0..n).map(|k| self.t[k][i])).collect();
            let mut acc = vec![0.0; n + 1];
            let mut tp = tser.clone();
            for vm in &self.v {
                for (a, b) in acc.iter_mut().zip(&tp) {
                    *a += vm * b;
                }
                tp = series_mul(&tp, &tser, n);
            }
            for k in 1..=n {
                h[k - 1][i] = acc[k];
            }
        }
        self.h_fn = h.iter().map(|hk| self.grid.fit(hk)).collect();
        self.h_ds = self.h_fn.iter().map(|f| f.derivative()).collect();
        self.h = h;
        Ok(())
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn h_coeffs(&self, s: f64) -> Vec<f64> {
        self.h_fn.iter().map(|f| f.eval(s)).collect()
    }

    /// Truncated normalized integral `h_N(s, y)`.
    pub fn h_value(&self, s: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        let mut yk = y;
        for f in &self.h_fn {
            acc += f.eval(s) * yk;
            yk *= y;
        }
        acc
    }

    /// `(dh/ds, dh/dy)`.
    pub fn h_grad(&self, s: f64, y: f64) -> (f64, f64) {
        let mut hs = 0.0;
        let mut hy = 0.0;
        let mut yk = 1.0;
        for (k, (f, d)) in self.h_fn.iter().zip(&self.h_ds).enumerate() {
            hy += (k + 1) as f64 * f.eval(s) * yk;
            yk *= y;
            hs += d.eval(s) * yk;
        }
        (hs, hy)
    }

    /// Solve `h(s, y) = level` for `y`.
    pub fn y_on_level(&self, s: f64, level: f64) -> f64 {
        let c = self.h_coeffs(s);
        let mut y = level / c[0];
        for _ in 0..60 {
            let mut val = 0.0;
            let mut der = 0.0;
            let mut yk = 1.0;
            for (k, ck) in c.iter().enumerate() {
                der += (k + 1) as f64 * ck * yk;
                yk *= y;
                val += ck * yk;
            }
            let dy = (val - level) / der;
            y -= dy;
            if dy.abs() <= 1e-16 * y.abs() {
                break;
            }
        }
        y
    }

    /// `max_s |h_N(F(s, y)) - h_N(s, y)|` over `n_s` points of the grid span.
    pub fn invariance_defect(&self, curve: &ConvexCurve, y: f64, n_s: usize) -> Result<f64> {
        let b = Billiard::new(curve);
        let (lo, hi) = self.grid.span();
        let pts: Vec<f64> = if self.closed {
            (0..n_s).map(|i| lo + (hi - lo) * i as f64 / n_s as f64).collect()
        } else {
            (0..n_s).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n_s as f64).collect()
        };
        let vals: Vec<Result<f64>> = pts
            .par_iter()
            .map(|&s| {
                let (s2, y2) = b.step_sy(s, y)?;
                if !self.closed && !(lo..=hi).contains(&s2) {
                    // image outside the sub-arc: the coefficients are not defined there
                    return Err(Error::EscapesDomain);
                }
                Ok((self.h_value(s2, y2) - self.h_value(s, y)).abs())
            })
            .collect();
        let mut worst: f64 = 0.0;
        for v in vals {
            match v {
                Ok(d) => worst = worst.max(d),
                Err(Error::EscapesDomain) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(worst)
    }

    /// Fitted log-log slope of the invariance defect over a `y` ladder.
    pub fn defect_slope(&self, curve: &ConvexCurve, ys: &[f64], n_s: usize) -> Result<(f64, Vec<f64>)> {
        let d: Vec<f64> = ys.iter().map(|&y| self.invariance_defect(curve, y, n_s)).collect::<Result<_>>()?;
        Ok((crate::numeric::loglog_slope(ys, &d), d))
    }
}
