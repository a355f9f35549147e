//! The billiard ball map in the `(s, phi)`, `(s, y)` and lifted `(s, z)` charts.
//!
//! `phi` is the angle from the orienting tangent to the outgoing direction,
//! `y = 1 - cos phi`, `z = sqrt(y)` (signed in the lifted chart). The step is
//! `I o beta` with `I(s, phi) = (s, -phi)`.
//!
//! On closed curves arc length is lifted to the universal cover: a forward
//! step always returns `s' in (s, s + L)`, so orbits have increasing `s`.

use crate::curve::{cross, rot90, ConvexCurve, Point};
use crate::error::{Error, Result};
use crate::numeric::{central_derivative, newton_bracketed};
use crate::taylor::Taylor;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub fn y_of_phi(phi: f64) -> f64 {
    let h = (0.5 * phi).sin();
    2.0 * h * h
}

pub fn phi_of_y(y: f64) -> f64 {
    2.0 * (0.5 * y).sqrt().asin()
}

/// Signed lifted coordinate: `z = sqrt(2) sin(phi / 2)`.
pub fn z_of_phi(phi: f64) -> f64 {
    2f64.sqrt() * (0.5 * phi).sin()
}

pub fn phi_of_z(z: f64) -> f64 {
    2.0 * (z / 2f64.sqrt()).asin()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Chart {
    SPhi,
    SY,
    SZ,
    TauH,
    LazutkinTZ,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub chart: Chart,
    pub c1: f64,
    pub c2: f64,
}

impl PhasePoint {
    pub fn new(chart: Chart, c1: f64, c2: f64) -> Self {
        PhasePoint { chart, c1, c2 }
    }
}

/// Angles below this use the tangency expansion instead of root finding.
pub const TANGENCY_CUTOFF: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
pub struct Billiard<'a> {
    pub curve: &'a ConvexCurve,
}

#[derive(Clone, Copy, Debug)]
struct Hit {
    u: f64,
    /// angle between the tangent at the hit and the incoming direction, in (0, pi)
    phi: f64,
}

impl<'a> Billiard<'a> {
    pub fn new(curve: &'a ConvexCurve) -> Self {
        Billiard { curve }
    }

    /// Curvature derivative `d kappa / ds`.
    pub fn kappa_prime(&self, s: f64) -> Result<f64> {
        let u = self.curve.u_of_s(s)?;
        let h = 1e-3 * self.curve.u_period().min(1.0);
        let dk = central_derivative(|v| self.curve.jet_u(v).curvature(), u, h, 1, 3);
        Ok(dk / self.curve.jet_u(u).speed())
    }

    /// Ray from native parameter `u` at angle `phi in (0, pi)` to its tangent.
    fn shoot(&self, u: f64, phi: f64) -> Result<Hit> {
        let c = self.curve;
        let j = c.jet_u(u);
        let t = j.tangent();
        let d = t * phi.cos() + rot90(t) * phi.sin();
        let f = |v: f64| cross(d, c.chord_u(u, v));
        let fdf = |v: f64| (cross(d, c.chord_u(u, v)), cross(d, c.jet_u(v).d1));
        let (lo_end, hi_end) = c.u_range();
        let xtol = 1e-15 * (1.0 + u.abs());

        let guess = |ang: f64| 2.0 * ang / (j.curvature() * j.speed());
        let root = if c.is_closed() {
            let p = c.u_period();
            // f < 0 just after u and f > 0 just before u + p
            let (mut a, mut b) = (u, u + p);
            let (mut have_a, mut have_b) = (false, false);
            let g1 = guess(phi);
            let g2 = guess(PI - phi);
            for cand in [u + 0.5 * g1, u + 1.5 * g1, u + p - 0.5 * g2, u + p - 1.5 * g2] {
                if cand > a && cand < b {
                    let fv = f(cand);
                    if fv < 0.0 {
                        a = cand;
                        have_a = true;
                    } else if fv > 0.0 {
                        b = cand;
                        have_b = true;
                    }
                }
            }
            let mut it = 0;
            while !(have_a && have_b) {
                let m = 0.5 * (a + b);
                let fv = f(m);
                if fv < 0.0 {
                    a = m;
                    have_a = true;
                } else if fv > 0.0 {
                    b = m;
                    have_b = true;
                } else {
                    return self.hit_at(m, d);
                }
                it += 1;
                if it > 200 {
                    return Err(Error::RootFindFailure("no bracket on closed curve".into()));
                }
            }
            newton_bracketed(fdf, a, b, xtol)?
        } else if f(hi_end) > 0.0 {
            let (mut a, b) = (u, hi_end);
            let g1 = guess(phi);
            let mut cand = u + 0.5 * g1;
            let mut it = 0;
            loop {
                if cand > a && cand < b && f(cand) < 0.0 {
                    a = cand;
                    break;
                }
                cand = 0.5 * (u + cand.min(b));
                it += 1;
                if it > 200 {
                    return Err(Error::RootFindFailure("no forward bracket".into()));
                }
            }
            newton_bracketed(fdf, a, b, xtol)?
        } else if f(lo_end) < 0.0 {
            let (a, mut b) = (lo_end, u);
            let g2 = guess(PI - phi);
            let mut cand = u - 0.5 * g2;
            let mut it = 0;
            loop {
                if cand > a && cand < b && f(cand) > 0.0 {
                    b = cand;
                    break;
                }
                cand = 0.5 * (u + cand.max(a));
                it += 1;
                if it > 200 {
                    return Err(Error::RootFindFailure("no backward bracket".into()));
                }
            }
            newton_bracketed(fdf, a, b, xtol)?
        } else {
            return Err(Error::EscapesDomain);
        };
        if !c.contains_u(root) {
            return Err(Error::EscapesDomain);
        }
        self.hit_at(root, d)
    }

    fn hit_at(&self, v: f64, d: Point) -> Result<Hit> {
        let t2 = self.curve.jet_u(v).tangent();
        Ok(Hit { u: v, phi: cross(d, t2).atan2(d.dot(&t2)) })
    }

    /// Other intersection of the ray at angle `phi in (0, pi)` with the curve,
    /// and the angle the incoming chord makes with the tangent there.
    pub fn second_intersection(&self, s: f64, phi: f64) -> Result<(f64, f64)> {
        if !(phi > 0.0 && phi < PI) {
            return Err(Error::Validation(format!("angle {phi} outside (0, pi)")));
        }
        if phi < TANGENCY_CUTOFF {
            return self.tangency_expansion(s, phi);
        }
        let u = self.curve.u_of_s(s)?;
        let hit = self.shoot(u, phi)?;
        Ok((self.lift_s(s, u, hit.u), hit.phi))
    }

    fn lift_s(&self, s: f64, u: f64, v: f64) -> f64 {
        s + self.curve.arc_between(u, v)
    }

    fn tangency_expansion(&self, s: f64, phi: f64) -> Result<(f64, f64)> {
        let k = self.curve.curvature_at(s)?;
        let kp = self.kappa_prime(s)?;
        let ds = 2.0 * phi / k - 4.0 * kp * phi * phi / (3.0 * k.powi(3));
        let s2 = s + ds;
        if !self.curve.is_closed() && s2 > self.curve.length() {
            return Err(Error::EscapesDomain);
        }
        Ok((s2, phi + 2.0 * kp * phi * phi / (3.0 * k * k)))
    }

    /// `beta(s, phi) = (s', -phi')` for `phi > 0`; for `phi < 0` the line is
    /// followed backwards and `beta(s, phi) = (s'', theta)` with `theta > 0`.
    pub fn beta(&self, s: f64, phi: f64) -> Result<(f64, f64)> {
        if phi > 0.0 {
            let (s2, p2) = self.second_intersection(s, phi)?;
            Ok((s2, -p2))
        } else if phi < 0.0 {
            self.backward(s, -phi)
        } else {
            Ok((s, 0.0))
        }
    }

    /// Preimage under the step of `(s, a)`, `a > 0`: the chord arriving at
    /// `s` that reflects to angle `a`.
    fn backward(&self, s: f64, a: f64) -> Result<(f64, f64)> {
        if !(a > 0.0 && a < PI) {
            return Err(Error::Validation(format!("angle {a} outside (0, pi)")));
        }
        if a < TANGENCY_CUTOFF {
            let k = self.curve.curvature_at(s)?;
            let kp = self.kappa_prime(s)?;
            let ds = 2.0 * a / k + 4.0 * kp * a * a / (3.0 * k.powi(3));
            let s2 = s - ds;
            if !self.curve.is_closed() && s2 < 0.0 {
                return Err(Error::EscapesDomain);
            }
            return Ok((s2, a - 2.0 * kp * a * a / (3.0 * k * k)));
        }
        let u = self.curve.u_of_s(s)?;
        let hit = self.shoot(u, PI - a)?;
        let v = if self.curve.is_closed() { hit.u - self.curve.u_period() } else { hit.u };
        Ok((self.lift_s(s, u, v), PI - hit.phi))
    }

    /// One step in the `(s, phi)` chart.
    pub fn step_sphi(&self, s: f64, phi: f64) -> Result<(f64, f64)> {
        let (s2, m) = self.beta(s, phi)?;
        Ok((s2, -m))
    }

    pub fn step_inverse_sphi(&self, s: f64, phi: f64) -> Result<(f64, f64)> {
        self.beta(s, -phi)
    }

    pub fn step_sy(&self, s: f64, y: f64) -> Result<(f64, f64)> {
        if !(y > 0.0 && y < 2.0) {
            return Err(Error::Validation(format!("y = {y} outside (0, 2)")));
        }
        let (s2, p2) = self.second_intersection(s, phi_of_y(y))?;
        Ok((s2, y_of_phi(p2)))
    }

    pub fn step_inverse_sy(&self, s: f64, y: f64) -> Result<(f64, f64)> {
        let (s2, p2) = self.step_inverse_sphi(s, phi_of_y(y))?;
        Ok((s2, y_of_phi(p2)))
    }

    /// Lifted step `F~(s, z)`, defined for `z` of either sign.
    pub fn step_sz(&self, s: f64, z: f64) -> Result<(f64, f64)> {
        if z == 0.0 {
            return Ok((s, 0.0));
        }
        let (s2, m) = self.beta(s, phi_of_z(z))?;
        Ok((s2, z_of_phi(-m)))
    }

    /// Taylor coefficients in `z` of `(s' - s, z')` at `z = 0`, by power
    /// series arithmetic on the curve's local expansion. `None` for sampled
    /// curves, which have no analytic expansion.
    pub fn step_jet(&self, s: f64, order: usize) -> Result<Option<(Taylor, Taylor)>> {
        let k = order;
        let u = self.curve.u_of_s(s)?;
        let Some((gx, gy)) = self.curve.taylor_u(u, k + 1) else {
            return Ok(None);
        };
        let t0 = Point::new(gx.0[1], gy.0[1]).normalize();
        let n0 = rot90(t0);
        let phi = Taylor::var(k).scale(std::f64::consts::FRAC_1_SQRT_2).asin().scale(2.0);
        let (sp, cp) = phi.sin_cos();
        let dx = cp.scale(t0.x).add(&sp.scale(n0.x));
        let dy = cp.scale(t0.y).add(&sp.scale(n0.y));
        // chord / delta as a series in delta
        let qx = Taylor(gx.0[1..].to_vec());
        let qy = Taylor(gy.0[1..].to_vec());
        let (qx1, qy1) = (qx.derivative(), qy.derivative());
        let mut delta = Taylor::zero(k);
        for _ in 0..(usize::BITS - k.leading_zeros() + 3) {
            let f = dx.mul(&Taylor::compose_into(&qy, &delta)).sub(&dy.mul(&Taylor::compose_into(&qx, &delta)));
            let fd = dx.mul(&Taylor::compose_into(&qy1, &delta)).sub(&dy.mul(&Taylor::compose_into(&qx1, &delta)));
            delta = delta.sub(&f.div(&fd));
            delta.0[0] = 0.0;
        }
        let (vx, vy) = (gx.derivative(), gy.derivative());
        let speed = vx.mul(&vx).add(&vy.mul(&vy)).sqrt();
        let ds = Taylor::compose_into(&speed.integral(), &delta);
        let (tx, ty) = (Taylor::compose_into(&vx, &delta), Taylor::compose_into(&vy, &delta));
        let norm = tx.mul(&tx).add(&ty.mul(&ty)).sqrt();
        let sin_out = dx.mul(&ty).sub(&dy.mul(&tx)).div(&norm);
        let z2 = sin_out.asin().scale(0.5).sin_cos().0.scale(std::f64::consts::SQRT_2);
        Ok(Some((ds, z2)))
    }

    pub fn step(&self, p: PhasePoint) -> Result<PhasePoint> {
        let (a, b) = match p.chart {
            Chart::SPhi => self.step_sphi(p.c1, p.c2)?,
            Chart::SY => self.step_sy(p.c1, p.c2)?,
            Chart::SZ => self.step_sz(p.c1, p.c2)?,
            other => {
                return Err(Error::Validation(format!("chart {other:?} needs a normal chart")));
            }
        };
        Ok(PhasePoint::new(p.chart, a, b))
    }

    /// Forward (or backward) orbit in the `(s, y)` chart until `n_max` steps or escape.
    pub fn orbit(&self, s0: f64, y0: f64, n_max: usize, backward: bool) -> Result<Orbit> {
        self.curve.frame(s0)?;
        let mut rows = Vec::with_capacity(n_max + 1);
        let push = |rows: &mut Vec<OrbitRow>, j: usize, s: f64, y: f64| -> Result<()> {
            let pos = self.curve.position(s)?;
            rows.push(OrbitRow { j, s, phi: phi_of_y(y), y, x: pos.x, y_coord: pos.y });
            Ok(())
        };
        push(&mut rows, 0, s0, y0)?;
        let (mut s, mut y) = (s0, y0);
        let mut escaped = false;
        for j in 1..=n_max {
            let r = if backward { self.step_inverse_sy(s, y) } else { self.step_sy(s, y) };
            match r {
                Ok((s2, y2)) => {
                    s = s2;
                    y = y2;
                    push(&mut rows, j, s, y)?;
                }
                Err(Error::EscapesDomain) | Err(Error::OutOfDomain { .. }) => {
                    escaped = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(Orbit { rows, escaped })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRow {
    pub j: usize,
    pub s: f64,
    pub phi: f64,
    pub y: f64,
    pub x: f64,
    pub y_coord: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub rows: Vec<OrbitRow>,
    /// The orbit left the arc before the step budget was exhausted.
    pub escaped: bool,
}

impl Orbit {
    pub fn steps(&self) -> usize {
        self.rows.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{build_curve, CurveSpec};
    use approx::assert_relative_eq;

    #[test]
    fn circle_step_is_rotation() {
        let c = build_curve(&CurveSpec::circle(2.0)).unwrap();
        let b = Billiard::new(&c);
        for (s, phi) in [(0.3, 0.2), (5.0, 1.3), (11.0, 2.9)] {
            let (s2, p2) = b.step_sphi(s, phi).unwrap();
            assert_relative_eq!(s2, s + 4.0 * phi, epsilon = 1e-12);
            assert_relative_eq!(p2, phi, epsilon = 1e-12);
        }
    }

    #[test]
    fn beta_is_an_involution_on_ellipse() {
        let c = build_curve(&CurveSpec::ellipse(2.0, 1.0)).unwrap();
        let b = Billiard::new(&c);
        for (s, phi) in [(0.1, 0.05), (3.0, 1.0), (7.0, -0.4), (2.0, 2.5)] {
            let (s1, p1) = b.beta(s, phi).unwrap();
            let (s2, p2) = b.beta(s1, p1).unwrap();
            assert_relative_eq!(s2, s, epsilon = 1e-9);
            assert_relative_eq!(p2, phi, epsilon = 1e-9);
        }
    }

    #[test]
    fn major_axis_chord_hits_opposite_vertex() {
        let c = build_curve(&CurveSpec::ellipse(2.0, 1.0)).unwrap();
        let b = Billiard::new(&c);
        let (s2, p2) = b.second_intersection(0.0, PI / 2.0).unwrap();
        assert_relative_eq!(s2, c.length() / 2.0, epsilon = 1e-10);
        assert_relative_eq!(p2, PI / 2.0, epsilon = 1e-10);
    }

    #[test]
    fn tangency_expansion_matches_root_finding() {
        let c = build_curve(&CurveSpec::ellipse(2.0, 1.0)).unwrap();
        let b = Billiard::new(&c);
        let s = 1.1;
        let u = c.u_of_s(s).unwrap();
        for phi in [1e-3, 3e-4] {
            let hit = b.shoot(u, phi).unwrap();
            let exact = (b.lift_s(s, u, hit.u), hit.phi);
            let approx = b.tangency_expansion(s, phi).unwrap();
            assert!((exact.0 - approx.0).abs() < 50.0 * phi.powi(3));
            assert!((exact.1 - approx.1).abs() < 50.0 * phi.powi(3));
        }
    }

    #[test]
    fn open_arc_orbit_escapes() {
        let c = build_curve(&CurveSpec::ellipse(2.0, 1.0).with_window(0.0, PI)).unwrap();
        let b = Billiard::new(&c);
        let o = b.orbit(0.01, 1e-2, 10_000, false).unwrap();
        assert!(o.escaped);
        assert!(o.steps() > 5);
    }
}
