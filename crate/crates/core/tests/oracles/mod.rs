//! Closed-form and brute-force references. Nothing here calls the evaluator
//! it is used to check.
#![allow(dead_code)]

use std::f64::consts::PI;

pub struct CircleCase {
    pub s_next: f64,
    pub phi_next: f64,
    pub caustic_radius: f64,
    pub t_l: f64,
    pub lazutkin_length: f64,
}

/// Billiard in the circle of radius `r`: inscribed-angle geometry.
pub fn circle_oracle(r: f64, s: f64, phi: f64) -> CircleCase {
    CircleCase {
        s_next: s + 2.0 * r * phi,
        phi_next: phi,
        caustic_radius: r * phi.cos(),
        t_l: s * (2.0 * 2f64.sqrt() * r).powf(-2.0 / 3.0),
        lazutkin_length: 2.0 * PI * r.powf(1.0 / 3.0),
    }
}

/// Normalized first integral of the circle billiard as a function of
/// `y = 1 - cos phi`: `(2/3) h^{3/2} = 2 r int_0^y arccos(1 - t) dt`.
pub fn circle_h(r: f64, y: f64) -> f64 {
    let u = 1.0 - y;
    let integral = (2.0 * y - y * y).sqrt() - u * u.acos();
    (3.0 * r * integral).powf(2.0 / 3.0)
}

/// Confocal parameter of the line through `p` with direction `d`, for the
/// ellipse `x^2/a^2 + y^2/b^2 = 1` centred at the origin: the line touches
/// `x^2/(a^2 - l) + y^2/(b^2 - l) = 1`.
pub fn ellipse_lambda(a: f64, b: f64, p: [f64; 2], d: [f64; 2]) -> f64 {
    let nd = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let (nx, ny) = (-d[1] / nd, d[0] / nd);
    let q = nx * p[0] + ny * p[1];
    a * a * nx * nx + b * b * ny * ny - q * q
}

/// Confocal parameter of a point on a caustic inside the ellipse: the root
/// in `(0, b^2)` of `l^2 - l (a^2 + b^2 - x^2 - y^2) + a^2 b^2 - x^2 b^2 - y^2 a^2`.
pub fn ellipse_point_lambda(a: f64, b: f64, p: [f64; 2]) -> Option<f64> {
    let (x, y) = (p[0], p[1]);
    let bb = a * a + b * b - x * x - y * y;
    let cc = a * a * b * b - x * x * b * b - y * y * a * a;
    let disc = bb * bb - 4.0 * cc;
    if disc < 0.0 {
        return None;
    }
    let r = 0.5 * (bb - disc.sqrt());
    (r > 0.0 && r < b * b).then_some(r)
}

/// One reflection in the ellipse from the boundary point `p` with unit
/// direction `d`: the other intersection of the line and the reflected
/// direction there.
pub fn ellipse_reflect(a: f64, b: f64, p: [f64; 2], d: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    // (p + t d) on the ellipse: t = -2 (p.d)_M / (d.d)_M with M = diag(1/a^2, 1/b^2)
    let m = |u: [f64; 2], v: [f64; 2]| u[0] * v[0] / (a * a) + u[1] * v[1] / (b * b);
    let t = -2.0 * m(p, d) / m(d, d);
    let q = [p[0] + t * d[0], p[1] + t * d[1]];
    let g = [q[0] / (a * a), q[1] / (b * b)];
    let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
    let n = [g[0] / gn, g[1] / gn];
    let dn = d[0] * n[0] + d[1] * n[1];
    (q, [d[0] - 2.0 * dn * n[0], d[1] - 2.0 * dn * n[1]])
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Trapezoid rule for a periodic integrand over one period.
pub fn periodic_trapezoid(f: impl Fn(f64) -> f64, period: f64, n: usize) -> f64 {
    let h = period / n as f64;
    (0..n).map(|i| f(h * i as f64)).sum::<f64>() * h
}

pub fn ellipse_perimeter(a: f64, b: f64) -> f64 {
    periodic_trapezoid(|u| (a * a * u.sin().powi(2) + b * b * u.cos().powi(2)).sqrt(), 2.0 * PI, 4096)
}

/// Exhaustive `max |g(F x) - g(x)|` over the grid; points where the map is
/// undefined are skipped.
pub fn bruteforce_invariance(
    g: impl Fn(f64, f64) -> f64,
    map: impl Fn(f64, f64) -> Option<(f64, f64)>,
    grid: &[(f64, f64)],
) -> f64 {
    grid.iter()
        .filter_map(|&(a, b)| map(a, b).map(|(a2, b2)| (g(a2, b2) - g(a, b)).abs()))
        .fold(0.0, f64::max)
}

/// `kappa^{2/3} ds/dx` for `y = x^r`.
pub fn power_density(r: f64, x: f64) -> f64 {
    (r * (r - 1.0)).powf(2.0 / 3.0) * x.powf(2.0 * (r - 2.0) / 3.0) / (1.0 + r * r * x.powf(2.0 * (r - 1.0))).sqrt()
}
