//! Charts in which the billiard step is `(tau, h) -> (tau + sqrt h, h)` up to
//! truncation, and the Lazutkin chart.
//!
//! `tau` is the Hamiltonian time of `h` measured from the section `s = s0`
//! along the level curve through the point. Writing `Y_h(s)` for the level
//! curve, `dtau/ds = 1 / h_y(s, Y_h(s)) = sum_j a_j(s) h^j`; the `a_j` come
//! from reverting the `y`-series of `h` on the grid, and `tau` is the sum of
//! their antiderivatives. The result agrees with direct integration along the
//! level curves to `O(h^N)`.

use crate::billiard::{phi_of_y, phi_of_z, y_of_phi, z_of_phi, Billiard, Chart, PhasePoint};
use crate::curve::ConvexCurve;
use crate::error::{Error, Result};
use crate::lines::{det2, jacobian};
use crate::numeric::integrate_adaptive;
use crate::series::InvariantSeries;
use crate::spectral::Spectral;
use crate::taylor::Taylor;

#[derive(Clone, Debug)]
pub struct NormalChart {
    pub series: InvariantSeries,
    pub s0: f64,
    pub y_max: f64,
    /// Antiderivatives of `a_j` vanishing at `s0`, with their secular slopes
    /// on closed curves.
    time: Vec<(Spectral, f64)>,
    rate: Vec<Spectral>,
}

/// Coefficients `a_j`, `j < N`, of `1 / h_y` along a level `h`, as a series in `h`.
fn level_rate(hk: &[f64]) -> Vec<f64> {
    let n = hk.len();
    let mut hs = Taylor::zero(n);
    hs.0[1..].copy_from_slice(hk);
    let hd = hs.derivative();
    let var = Taylor::var(n);
    let mut y = var.scale(1.0 / hk[0]);
    for _ in 0..(n + 2) {
        let r = Taylor::compose_into(&hs, &y).sub(&var);
        y = y.sub(&r.div(&Taylor::compose_into(&hd, &y)));
        y.0[0] = 0.0;
    }
    Taylor::compose_into(&hd, &y).recip().0[..n].to_vec()
}

pub fn build_normal_chart(series: &InvariantSeries, s0: Option<f64>, y_max: Option<f64>) -> Result<NormalChart> {
    if series.order < 2 {
        return Err(Error::Validation("normal chart needs series order >= 2".into()));
    }
    let (lo, hi) = series.grid.span();
    let s0 = s0.unwrap_or(0.5 * (lo + hi));
    if !series.is_closed() && !(lo..=hi).contains(&s0) {
        return Err(Error::OutsideValidity(format!("section s0 = {s0} outside [{lo}, {hi}]")));
    }
    let n = series.order;
    let mut a = vec![vec![0.0; series.s.len()]; n];
    for i in 0..series.s.len() {
        let hk: Vec<f64> = (0..n).map(|k| series.h[k][i]).collect();
        for (j, v) in level_rate(&hk).into_iter().enumerate() {
            a[j][i] = v;
        }
    }
    let rate: Vec<Spectral> = a.iter().map(|aj| series.grid.fit(aj)).collect();
    let time = rate
        .iter()
        .map(|r| {
            let (anti, mean) = r.antiderivative(s0);
            (anti, mean)
        })
        .collect();
    let mut chart = NormalChart { series: series.clone(), s0, y_max: y_max.unwrap_or(0.0), time, rate };
    if y_max.is_none() {
        chart.y_max = chart.certify_window(0.05);
    }
    Ok(chart)
}

impl NormalChart {
    fn in_span(&self, s: f64) -> Result<()> {
        if self.series.is_closed() {
            return Ok(());
        }
        let (lo, hi) = self.series.grid.span();
        if s < lo || s > hi {
            return Err(Error::LevelCurveEscape);
        }
        Ok(())
    }

    /// `dtau/ds` along the level `h` at `s`.
    pub fn tau_rate(&self, s: f64, h: f64) -> f64 {
        self.rate.iter().rev().fold(0.0, |acc, r| acc * h + r.eval(s))
    }

    fn tau_at(&self, s: f64, h: f64) -> f64 {
        self.time
            .iter()
            .rev()
            .fold(0.0, |acc, (anti, mean)| acc * h + anti.eval(s) + mean * (s - self.s0))
    }

    /// `(tau, h)` of a point; `s` is lifted on closed curves.
    pub fn forward(&self, s: f64, y: f64) -> Result<(f64, f64)> {
        self.in_span(s)?;
        let h = self.series.h_value(s, y);
        Ok((self.tau_at(s, h), h))
    }

    /// Inverse chart by Newton in `s` along the level `h`.
    pub fn inverse(&self, tau: f64, h: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.series.grid.span();
        let mut s = self.s0 + tau / self.tau_rate(self.s0, h);
        for _ in 0..60 {
            if !self.series.is_closed() {
                s = s.clamp(lo, hi);
            }
            let ds = (self.tau_at(s, h) - tau) / self.tau_rate(s, h);
            s -= ds;
            if ds.abs() <= 1e-15 * (1.0 + s.abs()) {
                self.in_span(s)?;
                return Ok((s, self.series.y_on_level(s, h)));
            }
        }
        Err(Error::RootFindFailure("chart inverse did not converge".into()))
    }

    /// `det d(tau, h)/d(s, y)` by central differences.
    pub fn jacobian_det(&self, s: f64, y: f64) -> Result<f64> {
        let j = jacobian(&|a, b| self.forward(a, b), s, y, 1e-4, 1e-3 * y)?;
        Ok(det2(&j))
    }

    /// Largest `y <= cap` (by bisection on a log scale) for which the chart
    /// determinant stays within `1e-3` of one at sampled footpoints.
    fn certify_window(&self, cap: f64) -> f64 {
        let (lo, hi) = self.series.grid.span();
        let probes: Vec<f64> = (0..9).map(|i| lo + (hi - lo) * (0.05 + 0.1125 * i as f64)).collect();
        let ok = |y: f64| {
            probes.iter().all(|&s| {
                self.jacobian_det(s, y).map(|d| (d - 1.0).abs() < 1e-3).unwrap_or(false)
                    && self.series.h_grad(s, y).1 > 0.0
            })
        };
        if ok(cap) {
            return cap;
        }
        let (mut a, mut b) = (1e-8f64, cap);
        if !ok(a) {
            return 0.0;
        }
        for _ in 0..40 {
            let m = (a * b).sqrt();
            if ok(m) {
                a = m;
            } else {
                b = m;
            }
        }
        a
    }

    /// Billiard step expressed in the chart.
    pub fn step(&self, curve: &ConvexCurve, tau: f64, h: f64) -> Result<(f64, f64)> {
        let (s, y) = self.inverse(tau, h)?;
        let (s2, y2) = Billiard::new(curve).step_sy(s, y)?;
        self.forward(s2, y2)
    }

    pub fn step_inverse(&self, curve: &ConvexCurve, tau: f64, h: f64) -> Result<(f64, f64)> {
        let (s, y) = self.inverse(tau, h)?;
        let (s2, y2) = Billiard::new(curve).step_inverse_sy(s, y)?;
        self.forward(s2, y2)
    }

    /// Max of `|tau' - tau - sqrt h| / h` and `|h' - h|` along one orbit.
    pub fn orbit_defect(&self, curve: &ConvexCurve, s: f64, y: f64, steps: usize) -> Result<(f64, f64)> {
        let b = Billiard::new(curve);
        let (mut s, mut y) = (s, y);
        let (mut dt, mut dh): (f64, f64) = (0.0, 0.0);
        for _ in 0..steps {
            let (t0, h0) = self.forward(s, y)?;
            let (s2, y2) = match b.step_sy(s, y) {
                Ok(p) => p,
                Err(Error::EscapesDomain) => break,
                Err(e) => return Err(e),
            };
            let (t1, h1) = match self.forward(s2, y2) {
                Ok(p) => p,
                Err(Error::LevelCurveEscape) => break,
                Err(e) => return Err(e),
            };
            dt = dt.max((t1 - t0 - h0.sqrt()).abs() / h0);
            dh = dh.max((h1 - h0).abs());
            (s, y) = (s2, y2);
        }
        Ok((dt, dh))
    }
}

/// `t_L(s) = int_{s0}^{s} w^{-2/3} = (1/2) int kappa^{2/3}`.
pub fn lazutkin_parameter(curve: &ConvexCurve, s0: f64, s: f64) -> Result<f64> {
    let f = |u: f64| {
        let j = curve.jet_u(u);
        0.5 * j.curvature().powf(2.0 / 3.0) * j.speed()
    };
    let (u0, u1) = if curve.is_closed() {
        // the chart is lifted; map both ends through one period shift
        let p = curve.length();
        let k0 = (s0 / p).floor();
        let k1 = (s / p).floor();
        let u0 = curve.u_of_s(s0 - k0 * p)? + k0 * curve.u_period();
        let u1 = curve.u_of_s(s - k1 * p)? + k1 * curve.u_period();
        (u0, u1)
    } else {
        (curve.u_of_s(s0)?, curve.u_of_s(s)?)
    };
    integrate_adaptive(f, u0, u1, 1e-13)
}

/// Lazutkin coordinates `(t_L, z_L)`, `z_L = w^{2/3} y`.
#[derive(Clone, Copy, Debug)]
pub struct LazutkinChart<'a> {
    pub curve: &'a ConvexCurve,
    pub s0: f64,
}

impl<'a> LazutkinChart<'a> {
    pub fn new(curve: &'a ConvexCurve, s0: f64) -> Self {
        LazutkinChart { curve, s0 }
    }
    pub fn forward(&self, s: f64, y: f64) -> Result<(f64, f64)> {
        let t = lazutkin_parameter(self.curve, self.s0, s)?;
        let sw = if self.curve.is_closed() { s.rem_euclid(self.curve.length()) } else { s };
        Ok((t, self.curve.w(sw)?.powf(2.0 / 3.0) * y))
    }
    pub fn inverse(&self, t: f64, z: f64) -> Result<(f64, f64)> {
        // t_L' = w^{-2/3} > 0: Newton from the linear guess
        let sw = |s: f64| if self.curve.is_closed() { s.rem_euclid(self.curve.length()) } else { s };
        let mut s = self.s0 + t * self.curve.w(sw(self.s0))?.powf(2.0 / 3.0);
        for _ in 0..60 {
            if !self.curve.is_closed() {
                s = s.clamp(0.0, self.curve.length());
            }
            let w23 = self.curve.w(sw(s))?.powf(2.0 / 3.0);
            let ds = (lazutkin_parameter(self.curve, self.s0, s)? - t) * w23;
            s -= ds;
            if ds.abs() < 1e-14 * (1.0 + s.abs()) {
                return Ok((s, z / self.curve.w(sw(s))?.powf(2.0 / 3.0)));
            }
        }
        Err(Error::RootFindFailure("chart inverse did not converge".into()))
    }
}

fn to_sy(p: PhasePoint, chart: Option<&NormalChart>, laz: Option<&LazutkinChart>) -> Result<(f64, f64)> {
    Ok(match p.chart {
        Chart::SY => (p.c1, p.c2),
        Chart::SPhi => (p.c1, y_of_phi(p.c2)),
        Chart::SZ => (p.c1, y_of_phi(phi_of_z(p.c2))),
        Chart::TauH => chart.ok_or_else(|| Error::Validation("no normal chart given".into()))?.inverse(p.c1, p.c2)?,
        Chart::LazutkinTZ => laz.ok_or_else(|| Error::Validation("no Lazutkin chart given".into()))?.inverse(p.c1, p.c2)?,
    })
}

/// Transport a phase point between charts through `(s, y)`.
pub fn to_chart(
    p: PhasePoint,
    target: Chart,
    chart: Option<&NormalChart>,
    laz: Option<&LazutkinChart>,
) -> Result<PhasePoint> {
    let (s, y) = to_sy(p, chart, laz)?;
    if let Some(c) = chart {
        if target == Chart::TauH && y > c.y_max {
            return Err(Error::OutsideValidity(format!("y = {y} above chart window {}", c.y_max)));
        }
    }
    let (a, b) = match target {
        Chart::SY => (s, y),
        Chart::SPhi => (s, phi_of_y(y)),
        Chart::SZ => (s, z_of_phi(phi_of_y(y))),
        Chart::TauH => chart.ok_or_else(|| Error::Validation("no normal chart given".into()))?.forward(s, y)?,
        Chart::LazutkinTZ => laz.ok_or_else(|| Error::Validation("no Lazutkin chart given".into()))?.forward(s, y)?,
    };
    Ok(PhasePoint::new(target, a, b))
}
