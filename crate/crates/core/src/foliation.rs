//! Invariant foliations near the boundary.
//!
//! Maps here act in a chart `(tau, phi)`, `phi = sqrt h`, where the step is
//! `(tau + phi, phi)` up to flat terms. A function invariant on a sector
//! around a fundamental domain is glued with a partition of unity in
//! `nu = tau / phi` and then transported along orbits.

use crate::curve::ConvexCurve;
use crate::error::{Error, Result};
use crate::normal_form::NormalChart;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A planar map in the `(tau, phi)` chart, with its inverse.
pub trait ChartMap: Sync {
    fn forward(&self, tau: f64, phi: f64) -> Result<(f64, f64)>;
    fn backward(&self, tau: f64, phi: f64) -> Result<(f64, f64)>;
}

/// The exact normal form `(tau, phi) -> (tau + phi, phi)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ModelMap;

impl ChartMap for ModelMap {
    fn forward(&self, tau: f64, phi: f64) -> Result<(f64, f64)> {
        Ok((tau + phi, phi))
    }
    fn backward(&self, tau: f64, phi: f64) -> Result<(f64, f64)> {
        Ok((tau - phi, phi))
    }
}

/// The billiard step seen through a normal chart.
#[derive(Clone, Copy, Debug)]
pub struct BilliardChartMap<'a> {
    pub chart: &'a NormalChart,
    pub curve: &'a ConvexCurve,
}

impl ChartMap for BilliardChartMap<'_> {
    fn forward(&self, tau: f64, phi: f64) -> Result<(f64, f64)> {
        let (t, h) = self.chart.step(self.curve, tau, phi * phi)?;
        Ok((t, h.sqrt()))
    }
    fn backward(&self, tau: f64, phi: f64) -> Result<(f64, f64)> {
        let (t, h) = self.chart.step_inverse(self.curve, tau, phi * phi)?;
        Ok((t, h.sqrt()))
    }
}

/// `exp(-1/x)`-based smooth step: 0 for `x <= 0`, 1 for `x >= 1`.
pub fn smooth_step(x: f64) -> f64 {
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let a = f(x);
    let b = f(1.0 - x);
    if a + b == 0.0 {
        return if x >= 1.0 { 1.0 } else { 0.0 };
    }
    a / (a + b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorGluing {
    pub chi: f64,
    pub sigma: f64,
    pub eta: f64,
    /// `tau` of the sector's apex.
    pub tau0: f64,
}

impl SectorGluing {
    pub fn new(chi: f64, sigma: f64, eta: f64, tau0: f64) -> Result<Self> {
        if !(chi > 0.0 && chi < 0.5) {
            return Err(Error::Validation(format!("chi = {chi} must lie in (0, 1/2)")));
        }
        if !(sigma > 0.0 && 2.0 * sigma < 0.5 - chi) {
            return Err(Error::Validation(format!("sigma = {sigma} must satisfy 0 < 2 sigma < 1/2 - chi")));
        }
        if !(eta > 0.0) {
            return Err(Error::Validation("eta must be positive".into()));
        }
        Ok(SectorGluing { chi, sigma, eta, tau0 })
    }

    pub fn rho2(&self, nu: f64) -> f64 {
        smooth_step((nu - 0.5 + self.sigma) / (2.0 * self.sigma))
    }

    pub fn rho1(&self, nu: f64) -> f64 {
        1.0 - self.rho2(nu)
    }

    pub fn nu(&self, tau: f64, phi: f64) -> f64 {
        (tau - self.tau0) / phi
    }

    pub fn contains(&self, tau: f64, phi: f64) -> bool {
        let nu = self.nu(tau, phi);
        phi > 0.0 && phi < self.eta && nu > -self.chi && nu < 1.0 + self.chi
    }

    /// Glued function `phi + rho2(nu) (phi o F^{-1} - phi)` on the sector.
    pub fn value(&self, map: &dyn ChartMap, tau: f64, phi: f64) -> Result<f64> {
        let r2 = self.rho2(self.nu(tau, phi));
        if r2 == 0.0 {
            return Ok(phi);
        }
        let (_, pb) = map.backward(tau, phi)?;
        Ok(phi + r2 * (pb - phi))
    }
}

/// Build the gluing after checking that `F^2` moves the doubled sector off
/// itself to the right.
pub fn glue_on_sector(map: &dyn ChartMap, chi: f64, sigma: f64, eta: f64, tau0: f64) -> Result<SectorGluing> {
    let g = SectorGluing::new(chi, sigma, eta, tau0)?;
    for i in 1..=12 {
        let phi = 2.0 * eta * i as f64 / 12.0;
        for j in 0..=8 {
            let nu = -chi + (1.0 + 2.0 * chi) * j as f64 / 8.0;
            let tau = tau0 + nu * phi;
            let (t1, p1) = map.forward(tau, phi).map_err(|e| Error::SectorTooLarge(e.to_string()))?;
            let (t2, p2) = map.forward(t1, p1).map_err(|e| Error::SectorTooLarge(e.to_string()))?;
            if (t2 - tau0) / p2 <= 1.0 + chi {
                return Err(Error::SectorTooLarge(format!(
                    "F^2 of ({tau:.3e}, {phi:.3e}) stays in the sector; use a smaller eta"
                )));
            }
        }
    }
    Ok(g)
}

/// `psi(t, h) = a exp(-1/(c h)) sin(2 pi t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatPerturbation {
    pub a: f64,
    pub c: f64,
}

impl FlatPerturbation {
    pub fn new(a: f64, c: f64) -> Result<Self> {
        if !(a.abs() < 0.125) {
            return Err(Error::Validation(format!("amplitude {a} violates |psi| < 1/8")));
        }
        if !(c > 0.0) {
            return Err(Error::Validation("sharpness c must be positive".into()));
        }
        Ok(FlatPerturbation { a, c })
    }
    fn envelope(&self, h: f64) -> f64 {
        if h <= 0.0 {
            0.0
        } else {
            self.a * (-1.0 / (self.c * h)).exp()
        }
    }
    pub fn eval(&self, t: f64, h: f64) -> f64 {
        self.envelope(h) * (2.0 * PI * t).sin()
    }
    pub fn d_t(&self, t: f64, h: f64) -> f64 {
        self.envelope(h) * 2.0 * PI * (2.0 * PI * t).cos()
    }
    pub fn d_h(&self, t: f64, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        self.envelope(h) / (self.c * h * h) * (2.0 * PI * t).sin()
    }
    /// Smallest level at which the exponent `1/(c h)` is at most 30, so that
    /// the perturbation is resolvable in double precision.
    pub fn visible_from(&self) -> f64 {
        1.0 / (30.0 * self.c)
    }
}

/// Per-band invariance certificate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `(h_lo, h_hi, max |g o F - g|)`.
    pub bands: Vec<(f64, f64, f64)>,
    /// Minimum of `dg/dh` over the window.
    pub min_dg_dh: f64,
    /// Maximum of `N(x) phi(x)` for extended fields.
    pub max_n_phi: f64,
}

impl Certificate {
    pub fn max_defect(&self) -> f64 {
        self.bands.iter().fold(0.0, |a, b| a.max(b.2))
    }
}

/// Window in the `(tau, h)` chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub tau: (f64, f64),
    pub h: (f64, f64),
}

impl Window {
    /// Levels on a log ladder and per-level `tau` samples with spacing
    /// proportional to `sqrt h`.
    pub fn grid(&self, levels: usize, per_step: usize) -> Vec<(f64, f64)> {
        let mut pts = vec![];
        for i in 0..levels {
            let h = self.h.0 * (self.h.1 / self.h.0).powf((i as f64 + 0.5) / levels as f64);
            let dt = h.sqrt() / per_step as f64;
            let n = (((self.tau.1 - self.tau.0) / dt).ceil() as usize).clamp(2, 400);
            for j in 0..n {
                pts.push((self.tau.0 + (self.tau.1 - self.tau.0) * (j as f64 + 0.5) / n as f64, h));
            }
        }
        pts
    }
}

pub enum FoliationField<'a> {
    /// Leaves `h = const`.
    Base,
    /// `h + eps psi(tau / sqrt h, h)`.
    Perturbed { psi: FlatPerturbation, eps: f64 },
    /// `h + sum eps_k / (k! 4^k) psi^k(tau / sqrt h, h)`.
    MultiPerturbed { psi: FlatPerturbation, eps: Vec<f64> },
    /// Glued sector function transported along orbits, squared back to the
    /// `h` scale.
    Extended { gluing: SectorGluing, map: &'a dyn ChartMap, max_steps: usize },
}

impl<'a> FoliationField<'a> {
    pub fn value(&self, tau: f64, h: f64) -> Result<f64> {
        Ok(match self {
            FoliationField::Base => h,
            FoliationField::Perturbed { psi, eps } => h + eps * psi.eval(tau / h.sqrt(), h),
            FoliationField::MultiPerturbed { psi, eps } => {
                let p = psi.eval(tau / h.sqrt(), h);
                let mut acc = h;
                let mut pk = 1.0;
                let mut fk = 1.0;
                for (k, e) in eps.iter().enumerate() {
                    pk *= p;
                    fk *= 4.0 * (k + 1) as f64;
                    acc += e * pk / fk;
                }
                acc
            }
            FoliationField::Extended { gluing, map, max_steps } => {
                let (v, _) = extended_value(gluing, *map, tau, h.sqrt(), *max_steps)?;
                v * v
            }
        })
    }

    /// `(dg/dtau, dg/dh)`.
    pub fn gradient(&self, tau: f64, h: f64) -> Result<(f64, f64)> {
        match self {
            FoliationField::Base => Ok((0.0, 1.0)),
            FoliationField::Perturbed { psi, eps } => {
                let sh = h.sqrt();
                let t = tau / sh;
                let gt = eps * psi.d_t(t, h) / sh;
                let gh = 1.0 + eps * (psi.d_t(t, h) * (-0.5 * tau / (h * sh)) + psi.d_h(t, h));
                Ok((gt, gh))
            }
            _ => {
                let dt = 1e-6 * (1.0 + tau.abs());
                let dh = 1e-4 * h;
                let gt = (self.value(tau + dt, h)? - self.value(tau - dt, h)?) / (2.0 * dt);
                let gh = (self.value(tau, h + dh)? - self.value(tau, h - dh)?) / (2.0 * dh);
                Ok((gt, gh))
            }
        }
    }

    /// Invariance defect `|g(F x) - g(x)|` per level band over the window,
    /// with `F` the step in the `(tau, h)` chart.
    pub fn certify(
        &self,
        step: &(dyn Fn(f64, f64) -> Result<(f64, f64)> + Sync),
        window: &Window,
        bands: usize,
        per_step: usize,
    ) -> Result<Certificate> {
        let mut cert = Certificate { min_dg_dh: f64::INFINITY, ..Default::default() };
        let ratio = (window.h.1 / window.h.0).powf(1.0 / bands as f64);
        for b in 0..bands {
            let lo = window.h.0 * ratio.powi(b as i32);
            let hi = lo * ratio;
            let w = Window { tau: window.tau, h: (lo, hi) };
            let pts = w.grid(2, per_step);
            let res: Vec<Result<(f64, f64, f64)>> = pts
                .par_iter()
                .map(|&(t, h)| {
                    let g0 = self.value(t, h)?;
                    let (t1, h1) = step(t, h)?;
                    let g1 = self.value(t1, h1)?;
                    let (_, gh) = self.gradient(t, h)?;
                    let nphi = match self {
                        FoliationField::Extended { gluing, map, max_steps } => {
                            let (_, n) = extended_value(gluing, *map, t, h.sqrt(), *max_steps)?;
                            n as f64 * h.sqrt()
                        }
                        _ => 0.0,
                    };
                    Ok(((g1 - g0).abs(), gh, nphi))
                })
                .collect();
            let mut worst: f64 = 0.0;
            for r in res {
                let (d, gh, nphi) = r?;
                worst = worst.max(d);
                cert.min_dg_dh = cert.min_dg_dh.min(gh);
                cert.max_n_phi = cert.max_n_phi.max(nphi);
            }
            cert.bands.push((lo, hi, worst));
        }
        Ok(cert)
    }
}

/// Value of the extended field and the number of steps to the fundamental
/// domain `0 <= nu < 1`.
pub fn extended_value(
    gluing: &SectorGluing,
    map: &dyn ChartMap,
    tau: f64,
    phi: f64,
    max_steps: usize,
) -> Result<(f64, usize)> {
    let (mut t, mut p) = (tau, phi);
    let mut n = 0;
    // the direction is fixed by the start so rounding at nu = 0 or 1 cannot
    // bounce the orbit back and forth
    let back = gluing.nu(t, p) >= 1.0;
    loop {
        let nu = gluing.nu(t, p);
        if (back && nu < 1.0) || (!back && nu >= 0.0) {
            break;
        }
        if n >= max_steps {
            return Err(Error::OrbitEscape);
        }
        (t, p) = if back { map.backward(t, p) } else { map.forward(t, p) }.map_err(|_| Error::OrbitEscape)?;
        n += 1;
    }
    if p >= gluing.eta {
        return Err(Error::OrbitEscape);
    }
    Ok((gluing.value(map, t, p)?, n))
}

/// `extend_by_dynamics`: the glued function transported to the window, with
/// its certificate.
pub fn extend_by_dynamics<'a>(
    gluing: SectorGluing,
    map: &'a dyn ChartMap,
    step: &(dyn Fn(f64, f64) -> Result<(f64, f64)> + Sync),
    window: &Window,
    max_steps: usize,
) -> Result<(FoliationField<'a>, Certificate)> {
    let field = FoliationField::Extended { gluing, map, max_steps };
    let cert = field.certify(step, window, 3, 4)?;
    Ok((field, cert))
}

/// Family `g_eps` over the given weights, each certified for the gradient
/// bound `dg/dh > 1/2` on the window.
pub fn perturbed_family(
    chart: &NormalChart,
    psi: FlatPerturbation,
    eps: &[f64],
    window: &Window,
) -> Result<Vec<FoliationField<'static>>> {
    let h_cap = chart.series.h_value(chart.s0, chart.y_max);
    if window.h.1 > h_cap {
        return Err(Error::OutsideValidity(format!("window reaches h = {:.3e} beyond the chart ({h_cap:.3e})", window.h.1)));
    }
    let mut out = vec![];
    for &e in eps {
        if !(0.0..=1.0).contains(&e) {
            return Err(Error::Validation(format!("weight {e} outside [0, 1]")));
        }
        let f = FoliationField::Perturbed { psi, eps: e };
        let mut worst = f64::INFINITY;
        for (t, h) in window.grid(8, 2) {
            worst = worst.min(f.gradient(t, h)?.1);
        }
        if worst <= 0.5 {
            return Err(Error::GradientLoss(worst));
        }
        out.push(f);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub min_abs: f64,
    pub max_abs: f64,
    /// Sign of `H` when it does not change over the window, else 0.
    pub sign: i8,
    pub failures: Vec<(f64, f64)>,
}

/// `H(g) = g_xx g_y^2 + g_yy g_x^2 - 2 g_xy g_x g_y` by central differences
/// at the given points; `floor` flags near-vanishing values.
pub fn hessian_convexity(
    g: &(dyn Fn(f64, f64) -> Result<f64> + Sync),
    points: &[(f64, f64)],
    step: f64,
    floor: f64,
) -> Result<HessianReport> {
    let vals: Vec<Result<f64>> = points
        .par_iter()
        .map(|&(x, y)| {
            let e = step;
            let f = |a: f64, b: f64| g(x + a * e, y + b * e);
            let (f00, fp0, fm0, f0p, f0m) = (f(0.0, 0.0)?, f(1.0, 0.0)?, f(-1.0, 0.0)?, f(0.0, 1.0)?, f(0.0, -1.0)?);
            let (fpp, fpm, fmp, fmm) = (f(1.0, 1.0)?, f(1.0, -1.0)?, f(-1.0, 1.0)?, f(-1.0, -1.0)?);
            let gx = (fp0 - fm0) / (2.0 * e);
            let gy = (f0p - f0m) / (2.0 * e);
            let gxx = (fp0 - 2.0 * f00 + fm0) / (e * e);
            let gyy = (f0p - 2.0 * f00 + f0m) / (e * e);
            let gxy = (fpp - fpm - fmp + fmm) / (4.0 * e * e);
            Ok(gxx * gy * gy + gyy * gx * gx - 2.0 * gxy * gx * gy)
        })
        .collect();
    let mut rep = HessianReport { min_abs: f64::INFINITY, max_abs: 0.0, sign: 0, failures: vec![] };
    let (mut pos, mut neg) = (false, false);
    for (v, &p) in vals.into_iter().zip(points) {
        let v = v?;
        rep.min_abs = rep.min_abs.min(v.abs());
        rep.max_abs = rep.max_abs.max(v.abs());
        if v.abs() <= floor {
            rep.failures.push(p);
        }
        pos |= v > 0.0;
        neg |= v < 0.0;
    }
    rep.sign = match (pos, neg) {
        (true, false) => 1,
        (false, true) => -1,
        _ => 0,
    };
    Ok(rep)
}
