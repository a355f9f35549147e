//! Oriented lines in the `(phi_az, p)` chart.
//!
//! `phi_az` is the direction angle of the line, `p` the signed distance to the
//! marked origin `O`: `p = cross(d, q - O)` for any point `q` on the line with
//! unit direction `d`. With this sign, `p > 0` exactly when the line turns
//! clockwise around `O`. The area form is `dphi_az ^ dp`.

use crate::curve::{cross, rot90, ConvexCurve, Point};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedLine {
    pub phi_az: f64,
    pub p: f64,
}

pub fn wrap_angle(a: f64) -> f64 {
    a.rem_euclid(2.0 * PI)
}

impl OrientedLine {
    pub fn direction(&self) -> Point {
        Point::new(self.phi_az.cos(), self.phi_az.sin())
    }
    /// Left normal of the direction.
    pub fn normal(&self) -> Point {
        rot90(self.direction())
    }
    /// Foot of the perpendicular from the origin.
    pub fn foot(&self, origin: Point) -> Point {
        origin + self.normal() * self.p
    }
    /// Signed distance of `x` to the left of the line.
    pub fn side(&self, x: Point, origin: Point) -> f64 {
        cross(self.direction(), x - origin) - self.p
    }
    pub fn reversed(&self) -> OrientedLine {
        OrientedLine { phi_az: wrap_angle(self.phi_az + PI), p: -self.p }
    }
}

/// The oriented line through `q` directed by the unit vector `u`.
pub fn line_through(q: Point, u: Point, origin: Point) -> OrientedLine {
    OrientedLine { phi_az: wrap_angle(u.y.atan2(u.x)), p: cross(u, q - origin) }
}

/// Line through `gamma(s1)` and `gamma(s2)` oriented from the first to the
/// second point; the tangent line when the footpoints coincide.
pub fn chord_to_line(curve: &ConvexCurve, s1: f64, s2: f64) -> Result<OrientedLine> {
    let (u1, u2) = (curve.u_of_s(s1)?, curve.u_of_s(s2)?);
    let q = curve.jet_u(u1).pos;
    let d = if (u2 - u1).abs() < 1e-14 {
        curve.jet_u(u1).tangent()
    } else {
        let c = curve.chord_u(u1, u2);
        c / c.norm()
    };
    Ok(line_through(q, d, curve.origin()))
}

/// Footpoint chart of a chord near tangency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChordCoordinates {
    pub s1: f64,
    pub s2: f64,
    pub alpha: f64,
    pub psi: f64,
}

impl ChordCoordinates {
    pub fn new(s1: f64, s2: f64) -> Self {
        let beta = 0.5 * (s2 - s1);
        ChordCoordinates { s1, s2, alpha: 0.5 * (s1 + s2), psi: beta * beta }
    }
    /// Inverse of the chart on the branch `s2 >= s1`.
    pub fn from_alpha_psi(alpha: f64, psi: f64) -> Self {
        let beta = psi.max(0.0).sqrt();
        ChordCoordinates { s1: alpha - beta, s2: alpha + beta, alpha, psi }
    }
}

/// Jacobian of a planar map by central differences with one Richardson step.
pub fn jacobian(
    map: &impl Fn(f64, f64) -> Result<(f64, f64)>,
    a: f64,
    b: f64,
    ha: f64,
    hb: f64,
) -> Result<[[f64; 2]; 2]> {
    let cd = |ha: f64, hb: f64| -> Result<[[f64; 2]; 2]> {
        let pa = map(a + ha, b)?;
        let ma = map(a - ha, b)?;
        let pb = map(a, b + hb)?;
        let mb = map(a, b - hb)?;
        Ok([
            [(pa.0 - ma.0) / (2.0 * ha), (pb.0 - mb.0) / (2.0 * hb)],
            [(pa.1 - ma.1) / (2.0 * ha), (pb.1 - mb.1) / (2.0 * hb)],
        ])
    };
    let j1 = cd(ha, hb).map_err(|_| Error::MapUndefined(a, b))?;
    let j2 = cd(0.5 * ha, 0.5 * hb).map_err(|_| Error::MapUndefined(a, b))?;
    let mut j = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            j[r][c] = (4.0 * j2[r][c] - j1[r][c]) / 3.0;
        }
    }
    Ok(j)
}

pub fn det2(j: &[[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

/// Max over the samples of `|det D(map) - 1|`; `steps` gives the difference
/// step per coordinate at each sample.
pub fn symplectic_area_defect(
    map: impl Fn(f64, f64) -> Result<(f64, f64)>,
    samples: &[(f64, f64)],
    steps: impl Fn(f64, f64) -> (f64, f64),
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &(a, b) in samples {
        let (ha, hb) = steps(a, b);
        let j = jacobian(&map, a, b, ha, hb)?;
        worst = worst.max((det2(&j) - 1.0).abs());
    }
    Ok(worst)
}
