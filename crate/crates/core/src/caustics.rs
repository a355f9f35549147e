//! Caustics as envelopes of invariant line families.
//!
//! A line family `theta -> (phi_az, p)` is read through its support function:
//! with normal angle `psi = phi_az + pi/2` and `n = (cos psi, sin psi)`, the
//! envelope is `O + p n + p_psi n_psi` and its radius of curvature is
//! `p + p_psipsi`.

use crate::billiard::{phi_of_y, y_of_phi};
use crate::curve::{cross, rot90, ConvexCurve, Point};
use crate::error::{Error, Result};
use crate::foliation::FoliationField;
use crate::lines::{line_through, OrientedLine};
use crate::normal_form::NormalChart;
use crate::numeric::newton_bracketed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Polar dual of a line: `O + n / p`.
pub fn dual_of_line(line: &OrientedLine, origin: Point) -> Result<Point> {
    if line.p.abs() < 1e-14 {
        return Err(Error::ThroughOrigin);
    }
    Ok(origin + line.normal() * (1.0 / line.p))
}

/// Polar dual of a point, oriented so that `p > 0`.
pub fn dual_of_point(x: Point, origin: Point) -> Result<OrientedLine> {
    let r = x - origin;
    let d = r.norm();
    if d < 1e-14 {
        return Err(Error::ThroughOrigin);
    }
    let n = r / d;
    Ok(OrientedLine { phi_az: crate::lines::wrap_angle(n.y.atan2(n.x) - 0.5 * PI), p: 1.0 / d })
}

fn unwrap_near(a: f64, reference: f64) -> f64 {
    a - 2.0 * PI * ((a - reference) / (2.0 * PI)).round()
}

/// Sampled envelope of a line family.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Caustic {
    pub theta: Vec<f64>,
    pub lines: Vec<OrientedLine>,
    pub points: Vec<Point>,
    /// `dc/dtheta = speed * d`, with `d` the line direction.
    pub speed: Vec<f64>,
    /// `(p + p_psipsi) sign p`; positive away from cusps.
    pub radius: Vec<f64>,
    /// Largest distance of an envelope point from its own line.
    pub on_line_residual: f64,
    /// Largest angle between the chord of consecutive envelope points and
    /// the family direction there.
    pub tangency_residual: f64,
    pub level: f64,
}

impl Caustic {
    pub fn directions(&self) -> impl Iterator<Item = Point> + '_ {
        self.lines.iter().map(|l| l.direction())
    }

    /// Cubic Hermite point and derivative on segment `i` at fraction `t`.
    fn hermite(&self, i: f64, t: f64) -> (Point, Point) {
        let i = i as usize;
        let dt = self.theta[i + 1] - self.theta[i];
        let (p0, p1) = (self.points[i], self.points[i + 1]);
        let m0 = self.lines[i].direction() * (self.speed[i] * dt);
        let m1 = self.lines[i + 1].direction() * (self.speed[i + 1] * dt);
        let (t2, t3) = (t * t, t * t * t);
        let pos = p0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + m0 * (t3 - 2.0 * t2 + t)
            + p1 * (-2.0 * t3 + 3.0 * t2)
            + m1 * (t3 - t2);
        let der = p0 * (6.0 * t2 - 6.0 * t) + m0 * (3.0 * t2 - 4.0 * t + 1.0) + p1 * (-6.0 * t2 + 6.0 * t) + m1 * (3.0 * t2 - 2.0 * t);
        (pos, der / dt)
    }

    /// Tangency points, as interpolated `(point, direction)`, of the lines
    /// through `x` that touch the sampled arc.
    pub fn tangents_from(&self, x: Point) -> Vec<(Point, Point)> {
        let f = |i: usize, t: f64| {
            let (c, dc) = self.hermite(i as f64, t);
            (cross(dc, c - x), c, dc)
        };
        let mut out = vec![];
        for i in 0..self.points.len() - 1 {
            let (fa, _, _) = f(i, 0.0);
            let (fb, _, _) = f(i, 1.0);
            if fa == 0.0 || fa.signum() != fb.signum() {
                let (mut lo, mut hi, mut flo) = (0.0, 1.0, fa);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let (fm, _, _) = f(i, mid);
                    if fm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if fm.signum() == flo.signum() {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                let (_, c, dc) = f(i, 0.5 * (lo + hi));
                out.push((c, dc / dc.norm()));
            }
        }
        out
    }

    /// First intersection parameter `t > 0` of the ray `x + t v` with the
    /// polyline.
    pub fn ray_hit(&self, x: Point, v: Point) -> Option<f64> {
        let mut best: Option<f64> = None;
        for w in self.points.windows(2) {
            let e = w[1] - w[0];
            let den = cross(v, e);
            if den.abs() < 1e-300 {
                continue;
            }
            let r = w[0] - x;
            let t = cross(r, e) / den;
            let u = cross(r, v) / den;
            if t > 0.0 && (0.0..=1.0).contains(&u) {
                best = Some(best.map_or(t, |b: f64| b.min(t)));
            }
        }
        best
    }
}

/// Envelope of `theta -> line(theta)` at the given parameters, with
/// support-function derivatives from five-point differences of step `fd`.
pub fn envelope_of_family(
    line: &(dyn Fn(f64) -> Result<OrientedLine> + Sync),
    thetas: &[f64],
    origin: Point,
    fd: f64,
) -> Result<Caustic> {
    let rows: Vec<Result<(OrientedLine, Point, f64, f64)>> = thetas
        .par_iter()
        .map(|&th| {
            let l0 = line(th)?;
            let psi0 = l0.phi_az + 0.5 * PI;
            let mut psi = [0.0; 5];
            let mut p = [0.0; 5];
            for (k, off) in [-2.0, -1.0, 0.0, 1.0, 2.0].iter().enumerate() {
                let l = if *off == 0.0 { l0 } else { line(th + off * fd)? };
                psi[k] = unwrap_near(l.phi_az + 0.5 * PI, psi0);
                p[k] = l.p;
            }
            let d1 = |v: &[f64; 5]| (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * fd);
            let d2 = |v: &[f64; 5]| (-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * fd * fd);
            let (psi1, psi2) = (d1(&psi), d2(&psi));
            let (p1, p2) = (d1(&p), d2(&p));
            let p_psi = p1 / psi1;
            let p_psipsi = (p2 * psi1 - p1 * psi2) / psi1.powi(3);
            let n = Point::new(psi0.cos(), psi0.sin());
            let n_psi = rot90(n);
            let c = origin + n * l0.p + n_psi * p_psi;
            let rad = l0.p + p_psipsi;
            // dc/dpsi = rad n_psi = -rad d
            Ok((l0, c, -rad * psi1, rad * l0.p.signum()))
        })
        .collect();
    let mut out = Caustic { theta: thetas.to_vec(), ..Default::default() };
    for (r, &th) in rows.into_iter().zip(thetas) {
        let (l, c, sp, rad) = r?;
        if rad <= 0.0 {
            return Err(Error::CuspDetected(th));
        }
        out.on_line_residual = out.on_line_residual.max(l.side(c, origin).abs());
        out.lines.push(l);
        out.points.push(c);
        out.speed.push(sp);
        out.radius.push(rad);
    }
    for i in 0..out.points.len().saturating_sub(1) {
        let e = out.points[i + 1] - out.points[i];
        let d = (out.lines[i].direction() + out.lines[i + 1].direction()) * 0.5;
        let a = cross(d, e).atan2(d.dot(&e)).abs();
        out.tangency_residual = out.tangency_residual.max(a.min(PI - a));
    }
    Ok(out)
}

/// Solve `field(chart(s, y)) = level` for `y`, starting from the base level
/// curve of the series.
pub fn leaf_y(chart: &NormalChart, field: &FoliationField<'_>, s: f64, level: f64) -> Result<f64> {
    let g = |y: f64| -> Result<f64> {
        let (t, h) = chart.forward(s, y)?;
        Ok(field.value(t, h)? - level)
    };
    let mut y0 = chart.series.y_on_level(s, level);
    if let FoliationField::Base = field {
        return Ok(y0);
    }
    let mut y1 = y0 * (1.0 + 1e-7);
    let (mut g0, mut g1) = (g(y0)?, g(y1)?);
    for _ in 0..50 {
        if g1 == g0 {
            break;
        }
        let y2 = y1 - g1 * (y1 - y0) / (g1 - g0);
        (y0, g0) = (y1, g1);
        y1 = y2;
        if !(y1 > 0.0) {
            return Err(Error::RootFindFailure(format!("leaf at s = {s} left the chart")));
        }
        g1 = g(y1)?;
        if (y1 - y0).abs() <= 1e-15 * y1 {
            return Ok(y1);
        }
    }
    // transported fields carry a few ulps of orbit rounding per step
    if g1.abs() < 1e-12 * level.abs().max(1e-300) {
        return Ok(y1);
    }
    Err(Error::RootFindFailure(format!("leaf at s = {s}, level {level}: residual {g1:e}")))
}

/// The outgoing line at footpoint `s` and angle `phi`.
pub fn phase_line(curve: &ConvexCurve, s: f64, phi: f64) -> Result<OrientedLine> {
    let f = curve.frame(s)?;
    let d = f.tangent * phi.cos() + f.normal() * phi.sin();
    Ok(line_through(f.pos, d, curve.origin()))
}

/// Caustic of the leaf `field = level` over footpoints `thetas`.
pub fn leaf_caustic(
    curve: &ConvexCurve,
    chart: &NormalChart,
    field: &FoliationField<'_>,
    level: f64,
    thetas: &[f64],
    fd: f64,
) -> Result<Caustic> {
    let line = |s: f64| -> Result<OrientedLine> {
        let y = leaf_y(chart, field, s, level)?;
        phase_line(curve, s, phi_of_y(y))
    };
    let mut c = envelope_of_family(&line, thetas, curve.origin(), fd)?;
    c.level = level;
    Ok(c)
}

/// Phase point `(s, phi)` of an oriented line cutting the curve near
/// tangency: the entry footpoint and the angle there.
pub fn line_to_phase(curve: &ConvexCurve, line: &OrientedLine) -> Result<(f64, f64)> {
    let o = curve.origin();
    let l = curve.length();
    let n0 = 64;
    let mut best = (f64::INFINITY, 0.0);
    let last = if curve.is_closed() { n0 } else { n0 - 1 };
    for i in 0..n0 {
        let s = l * i as f64 / last as f64;
        let t = curve.tangent(s)?;
        let a = (t.y.atan2(t.x) - line.phi_az).rem_euclid(2.0 * PI);
        let a = a.min(2.0 * PI - a);
        if a < best.0 {
            best = (a, s);
        }
    }
    let mut st = best.1;
    for _ in 0..60 {
        let f = curve.frame(st)?;
        let a = unwrap_near(f.tangent.y.atan2(f.tangent.x) - line.phi_az, 0.0);
        let step = a / f.curvature;
        st -= step;
        if !curve.is_closed() {
            st = st.clamp(0.0, l);
        }
        if step.abs() < 1e-15 * l {
            break;
        }
    }
    let side = |s: f64| -> (f64, f64) {
        match curve.frame(s) {
            Ok(f) => (line.side(f.pos, o), cross(line.direction(), f.tangent)),
            Err(_) => (f64::NAN, f64::NAN),
        }
    };
    let (s0v, _) = side(st);
    if !(s0v < 0.0) {
        return Err(Error::NoRealTangency);
    }
    let mut delta = (2.0 * (-s0v) / curve.curvature_at(st)?).sqrt().max(1e-12);
    let mut bracket = |sign: f64| -> Result<f64> {
        for _ in 0..60 {
            let s = st + sign * delta;
            if !curve.is_closed() && !(0.0..=l).contains(&s) {
                return Err(Error::EscapesDomain);
            }
            if side(s).0 > 0.0 {
                return newton_bracketed(side, st, s, 1e-15 * l.max(1.0));
            }
            delta *= 1.5;
        }
        Err(Error::RootFindFailure("chord endpoint not bracketed".into()))
    };
    let s1 = bracket(-1.0)?;
    let t = curve.tangent(s1)?;
    let d = line.direction();
    let phi = cross(t, d).atan2(t.dot(&d));
    Ok((s1, phi))
}

/// `field` as a function on the dual plane, through the normal chart.
pub fn dual_field<'a>(
    curve: &'a ConvexCurve,
    chart: &'a NormalChart,
    field: &'a FoliationField<'a>,
) -> impl Fn(f64, f64) -> Result<f64> + Sync + 'a {
    move |x: f64, y: f64| {
        let line = dual_of_point(Point::new(x, y), curve.origin())?;
        // dual lines have p > 0; boundary lines run counterclockwise with p < 0
        let (s, phi) = line_to_phase(curve, &line.reversed())?;
        let (t, h) = chart.forward(s, y_of_phi(phi))?;
        field.value(t, h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangencyReport {
    /// Footpoints tested.
    pub s: Vec<f64>,
    /// `|alpha_1 + alpha_2 - pi|` per footpoint.
    pub defect: Vec<f64>,
}

impl TangencyReport {
    pub fn max_defect(&self) -> f64 {
        self.defect.iter().fold(0.0, |a, &b| a.max(b))
    }
}

/// Reflection symmetry of the two tangent lines from boundary points to the
/// caustic about the boundary tangent.
pub fn tangency_validate(curve: &ConvexCurve, caustic: &Caustic, footpoints: &[f64]) -> Result<TangencyReport> {
    let mut rep = TangencyReport { s: vec![], defect: vec![] };
    for &s in footpoints {
        let f = curve.frame(s)?;
        let tans = caustic.tangents_from(f.pos);
        if tans.len() != 2 {
            return Err(Error::NoRealTangency);
        }
        let mut alpha = [0.0; 2];
        for (k, (c, _)) in tans.iter().enumerate() {
            let r = *c - f.pos;
            alpha[k] = cross(f.tangent, r).atan2(f.tangent.dot(&r));
        }
        rep.s.push(s);
        rep.defect.push((alpha[0] + alpha[1] - PI).abs());
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausticFoliation {
    pub caustics: Vec<Caustic>,
    /// Per level, the largest distance along inward normals from the
    /// boundary to the caustic.
    pub depth: Vec<f64>,
}

/// Order caustics by level and check that inward normal rays meet them in
/// the same order.
pub fn assemble_caustic_foliation(curve: &ConvexCurve, mut caustics: Vec<Caustic>, probes: &[f64]) -> Result<CausticFoliation> {
    caustics.sort_by(|a, b| a.level.total_cmp(&b.level));
    let mut depth = vec![0.0; caustics.len()];
    for &s in probes {
        let f = curve.frame(s)?;
        let mut prev = 0.0;
        for (k, c) in caustics.iter().enumerate() {
            let t = c.ray_hit(f.pos, f.normal()).ok_or_else(|| Error::LeavesCross(format!("normal at s = {s} misses level {}", c.level)))?;
            if t <= prev {
                return Err(Error::LeavesCross(format!("levels out of order along the normal at s = {s}")));
            }
            prev = t;
            depth[k] = f64::max(depth[k], t);
        }
    }
    Ok(CausticFoliation { caustics, depth })
}
