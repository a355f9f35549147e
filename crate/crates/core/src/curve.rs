//! Strictly convex planar curves in arc-length parametrization.
//!
//! Every curve is evaluated through a native parameter `u` (angle for circles
//! and ellipses, abscissa for graphs, cumulative chord length for sampled
//! input). Arc length is tabulated on panels with a 20-point Gauss–Legendre
//! rule and inverted by Newton, so `s <-> u` conversions are accurate to
//! rounding on analytic kinds.

use crate::error::{Error, Result};
use crate::numeric::{fd_weights, gl_panel};
use crate::taylor::Taylor;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Point = Vector2<f64>;

/// Explicit convex graph families `y = f(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GraphFn {
    /// `y = |x|^r`; negative abscissae are accepted only for even integer `r`.
    Power { r: f64 },
    /// `y = sqrt(a^2 + x^2)`, asymptotic to `y = |x|` at both ends.
    Hyperbola { a: f64 },
}

impl GraphFn {
    /// Value and first three derivatives.
    pub fn eval(&self, x: f64) -> [f64; 4] {
        match *self {
            GraphFn::Power { r } => {
                let ax = x.abs();
                let sg = if x < 0.0 { -1.0 } else { 1.0 };
                // for even integer r the sign pattern reduces to plain x^r
                [
                    ax.powf(r),
                    sg * r * ax.powf(r - 1.0),
                    r * (r - 1.0) * ax.powf(r - 2.0),
                    sg * r * (r - 1.0) * (r - 2.0) * ax.powf(r - 3.0),
                ]
            }
            GraphFn::Hyperbola { a } => {
                let f = (a * a + x * x).sqrt();
                [f, x / f, a * a / f.powi(3), -3.0 * a * a * x / f.powi(5)]
            }
        }
    }

    fn allows_negative(&self) -> bool {
        match *self {
            GraphFn::Power { r } => r.fract() == 0.0 && (r as i64) % 2 == 0,
            GraphFn::Hyperbola { .. } => true,
        }
    }

    /// Limit of `f'` toward `+inf` (`sign = 1`) or `-inf` (`sign = -1`), when finite.
    pub fn slope_limit(&self, sign: f64) -> Option<f64> {
        match *self {
            GraphFn::Power { .. } => None,
            GraphFn::Hyperbola { .. } => Some(sign),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CurveKind {
    Circle { radius: f64 },
    Ellipse { a: f64, b: f64 },
    Graph { f: GraphFn, x_min: f64, x_max: f64 },
    Sampled { points: Vec<[f64; 2]>, closed: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EndBehavior {
    FiniteEndpoint,
    AsymptoticLine { direction: [f64; 2] },
    UnboundedNoAsymptote,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub kind: CurveKind,
    /// Restrict a closed curve to the open arc `u in (u0, u1)` of its native parameter.
    pub window: Option<(f64, f64)>,
    /// Half-width of the tabulated abscissa range used for infinite graph ends.
    pub graph_span: f64,
    /// Arc-length panels per unit native parameter for tabulated kinds.
    pub resolution: usize,
    /// End-behaviour override (sampled kind).
    pub ends: Option<[EndBehavior; 2]>,
    /// Duality/line-chart origin override.
    pub origin: Option<[f64; 2]>,
}

impl CurveSpec {
    pub fn new(kind: CurveKind) -> Self {
        CurveSpec { kind, window: None, graph_span: 20.0, resolution: 64, ends: None, origin: None }
    }
    pub fn circle(radius: f64) -> Self {
        Self::new(CurveKind::Circle { radius })
    }
    pub fn ellipse(a: f64, b: f64) -> Self {
        Self::new(CurveKind::Ellipse { a, b })
    }
    pub fn graph(f: GraphFn, x_min: f64, x_max: f64) -> Self {
        Self::new(CurveKind::Graph { f, x_min, x_max })
    }
    pub fn sampled(points: Vec<[f64; 2]>, closed: bool) -> Self {
        Self::new(CurveKind::Sampled { points, closed })
    }
    pub fn with_window(mut self, u0: f64, u1: f64) -> Self {
        self.window = Some((u0, u1));
        self
    }
}

/// Position and first two native-parameter derivatives.
#[derive(Clone, Copy, Debug)]
pub struct UJet {
    pub pos: Point,
    pub d1: Point,
    pub d2: Point,
}

impl UJet {
    pub fn speed(&self) -> f64 {
        self.d1.norm()
    }
    pub fn tangent(&self) -> Point {
        self.d1 / self.d1.norm()
    }
    pub fn curvature(&self) -> f64 {
        cross(self.d1, self.d2) / self.d1.norm().powi(3)
    }
}

/// Unit-speed frame at one arc-length value.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub pos: Point,
    pub tangent: Point,
    pub curvature: f64,
}

impl Frame {
    /// Inward normal (tangent rotated by +pi/2).
    pub fn normal(&self) -> Point {
        rot90(self.tangent)
    }
}

pub fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

pub fn rot90(a: Point) -> Point {
    Point::new(-a.y, a.x)
}

#[derive(Clone, Debug)]
enum Shape {
    Circle(f64),
    Ellipse(f64, f64),
    Graph(GraphFn),
    Sampled { u: Vec<f64>, xy: Vec<Point>, closed: bool, period: f64 },
}

impl Shape {
    fn jet(&self, u: f64) -> UJet {
        match self {
            Shape::Circle(r) => {
                let (s, c) = u.sin_cos();
                UJet {
                    pos: Point::new(r * c, r * s),
                    d1: Point::new(-r * s, r * c),
                    d2: Point::new(-r * c, -r * s),
                }
            }
            Shape::Ellipse(a, b) => {
                let (s, c) = u.sin_cos();
                UJet {
                    pos: Point::new(a * c, b * s),
                    d1: Point::new(-a * s, b * c),
                    d2: Point::new(-a * c, -b * s),
                }
            }
            Shape::Graph(f) => {
                let v = f.eval(u);
                UJet {
                    pos: Point::new(u, v[0]),
                    d1: Point::new(1.0, v[1]),
                    d2: Point::new(0.0, v[2]),
                }
            }
            Shape::Sampled { u: us, xy, closed, period } => sampled_jet(us, xy, *closed, *period, u),
        }
    }

    /// `pos(u1) - pos(u0)` with the cancellation-free forms where available.
    fn chord(&self, u0: f64, u1: f64) -> Point {
        match self {
            Shape::Circle(r) => {
                let h = 0.5 * (u1 - u0);
                let m = 0.5 * (u1 + u0);
                let k = 2.0 * h.sin();
                Point::new(-r * k * m.sin(), r * k * m.cos())
            }
            Shape::Ellipse(a, b) => {
                let h = 0.5 * (u1 - u0);
                let m = 0.5 * (u1 + u0);
                let k = 2.0 * h.sin();
                Point::new(-a * k * m.sin(), b * k * m.cos())
            }
            _ => self.jet(u1).pos - self.jet(u0).pos,
        }
    }
}

fn sampled_jet(us: &[f64], xy: &[Point], closed: bool, period: f64, u: f64) -> UJet {
    let n = us.len();
    let uu = if closed { u - ((u - us[0]) / period).floor() * period } else { u };
    let i = us.partition_point(|&v| v <= uu).saturating_sub(1).min(n - 2);
    let mut nodes = Vec::with_capacity(6);
    let mut pts = Vec::with_capacity(6);
    if closed {
        for off in -2i64..=3 {
            let j = i as i64 + off;
            let m = j.rem_euclid(n as i64) as usize;
            nodes.push(us[m] + j.div_euclid(n as i64) as f64 * period);
            pts.push(xy[m]);
        }
    } else {
        let start = (i as i64 - 2).clamp(0, n as i64 - 6) as usize;
        for m in start..start + 6 {
            nodes.push(us[m]);
            pts.push(xy[m]);
        }
    }
    let w = fd_weights(uu, &nodes, 2);
    let mut out = [Point::zeros(); 3];
    for k in 0..3 {
        for j in 0..6 {
            out[k] += w[k][j] * pts[j];
        }
    }
    UJet { pos: out[0], d1: out[1], d2: out[2] }
}

/// A strictly convex curve, immutable after construction.
#[derive(Clone, Debug)]
pub struct ConvexCurve {
    spec: CurveSpec,
    shape: Shape,
    u_lo: f64,
    u_hi: f64,
    closed: bool,
    nodes: Vec<f64>,
    cum: Vec<f64>,
    ends: Option<[EndBehavior; 2]>,
    origin: Point,
}

pub fn build_curve(spec: &CurveSpec) -> Result<ConvexCurve> {
    ConvexCurve::new(spec.clone())
}

impl ConvexCurve {
    pub fn new(spec: CurveSpec) -> Result<Self> {
        let (shape, mut u_lo, mut u_hi, mut closed) = match &spec.kind {
            CurveKind::Circle { radius } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::DegenerateSpec(format!("radius {radius} must be positive")));
                }
                (Shape::Circle(*radius), 0.0, 2.0 * PI, true)
            }
            CurveKind::Ellipse { a, b } => {
                if !(*a > 0.0 && *b > 0.0) {
                    return Err(Error::DegenerateSpec(format!("semi-axes ({a}, {b}) must be positive")));
                }
                (Shape::Ellipse(*a, *b), 0.0, 2.0 * PI, true)
            }
            CurveKind::Graph { f, x_min, x_max } => {
                if !(x_max > x_min) {
                    return Err(Error::DegenerateSpec(format!("empty abscissa range [{x_min}, {x_max}]")));
                }
                if *x_min < 0.0 && !f.allows_negative() {
                    return Err(Error::DegenerateSpec("power graph needs x > 0 unless r is even".into()));
                }
                if let GraphFn::Power { r } = f {
                    if *r <= 1.0 {
                        return Err(Error::NonConvex { kappa: 0.0, at: *x_min });
                    }
                }
                let span = spec.graph_span;
                let lo = if x_min.is_finite() { *x_min } else { x_max.min(0.0) - span };
                let hi = if x_max.is_finite() { *x_max } else { x_min.max(0.0) + span };
                (Shape::Graph(f.clone()), lo, hi, false)
            }
            CurveKind::Sampled { points, closed } => {
                if points.len() < 8 {
                    return Err(Error::DegenerateSpec("sampled curve needs at least 8 points".into()));
                }
                let xy: Vec<Point> = points.iter().map(|p| Point::new(p[0], p[1])).collect();
                let mut us = vec![0.0];
                for k in 1..xy.len() {
                    let d = (xy[k] - xy[k - 1]).norm();
                    if d == 0.0 {
                        return Err(Error::DegenerateSpec("repeated sample point".into()));
                    }
                    us.push(us[k - 1] + d);
                }
                let period = if *closed { us[us.len() - 1] + (xy[0] - xy[xy.len() - 1]).norm() } else { 0.0 };
                let hi = if *closed { period } else { us[us.len() - 1] };
                (Shape::Sampled { u: us, xy, closed: *closed, period }, 0.0, hi, *closed)
            }
        };
        if let Some((w0, w1)) = spec.window {
            if !(w1 > w0) {
                return Err(Error::DegenerateSpec(format!("empty window ({w0}, {w1})")));
            }
            if closed && w1 - w0 >= u_hi - u_lo {
                return Err(Error::DegenerateSpec("window covers the whole closed curve".into()));
            }
            if !closed && (w0 < u_lo || w1 > u_hi) {
                return Err(Error::DegenerateSpec("window exceeds the curve range".into()));
            }
            u_lo = w0;
            u_hi = w1;
            closed = false;
        }

        // strict convexity check on a dense sample
        let n_check = 4096;
        for k in 0..=n_check {
            let u = u_lo + (u_hi - u_lo) * k as f64 / n_check as f64;
            let kap = shape.jet(u).curvature();
            if !(kap >= 1e-12) {
                return Err(Error::NonConvex { kappa: kap, at: u });
            }
        }

        let nodes = panel_nodes(&shape, u_lo, u_hi, spec.resolution.max(8));
        let mut cum = vec![0.0; nodes.len()];
        for i in 1..nodes.len() {
            cum[i] = cum[i - 1] + gl_panel(|u| shape.jet(u).speed(), nodes[i - 1], nodes[i]);
        }
        if !(cum[cum.len() - 1] > 0.0) {
            return Err(Error::DegenerateSpec("zero-length curve".into()));
        }

        let ends = if closed {
            None
        } else if let Some(e) = &spec.ends {
            Some(e.clone())
        } else {
            Some(infer_ends(&spec, &shape, u_lo, u_hi))
        };

        let mut curve = ConvexCurve {
            spec: spec.clone(),
            shape,
            u_lo,
            u_hi,
            closed,
            nodes,
            cum,
            ends,
            origin: Point::zeros(),
        };
        curve.origin = match spec.origin {
            Some(o) => Point::new(o[0], o[1]),
            None => curve.default_origin(),
        };
        Ok(curve)
    }

    fn default_origin(&self) -> Point {
        match &self.shape {
            Shape::Circle(_) | Shape::Ellipse(..) => Point::zeros(),
            Shape::Sampled { xy, .. } => xy.iter().sum::<Point>() / xy.len() as f64,
            Shape::Graph(_) => {
                let j = self.shape.jet(0.5 * (self.u_lo + self.u_hi));
                j.pos + rot90(j.tangent()) * (0.5 / j.curvature())
            }
        }
    }

    pub fn spec(&self) -> &CurveSpec {
        &self.spec
    }
    pub fn is_closed(&self) -> bool {
        self.closed
    }
    /// Total (tabulated) arc length.
    pub fn length(&self) -> f64 {
        self.cum[self.cum.len() - 1]
    }
    pub fn s_domain(&self) -> (f64, f64) {
        (0.0, self.length())
    }
    pub fn u_range(&self) -> (f64, f64) {
        (self.u_lo, self.u_hi)
    }
    pub fn u_period(&self) -> f64 {
        self.u_hi - self.u_lo
    }
    pub fn ends(&self) -> Option<&[EndBehavior; 2]> {
        self.ends.as_ref()
    }
    pub fn origin(&self) -> Point {
        self.origin
    }
    /// Typical length scale: the inverse of the maximal sampled curvature times 1,
    /// bounded by the arc length.
    pub fn scale(&self) -> f64 {
        let mut kmax: f64 = 0.0;
        for k in 0..=256 {
            let u = self.u_lo + (self.u_hi - self.u_lo) * k as f64 / 256.0;
            kmax = kmax.max(self.shape.jet(u).curvature());
        }
        (1.0 / kmax).min(self.length())
    }

    pub fn jet_u(&self, u: f64) -> UJet {
        self.shape.jet(u)
    }

    pub fn chord_u(&self, u0: f64, u1: f64) -> Point {
        self.shape.chord(u0, u1)
    }

    /// Taylor coefficients of `pos(u + d)` in `d` up to order `k`, for the
    /// analytic kinds.
    pub fn taylor_u(&self, u: f64, k: usize) -> Option<(Taylor, Taylor)> {
        let trig = |a: f64, b: f64| {
            let (s, c) = u.sin_cos();
            let mut x = Taylor::zero(k);
            let mut y = Taylor::zero(k);
            // derivatives of (cos, sin) cycle with period four
            let cyc_c = [c, -s, -c, s];
            let cyc_s = [s, c, -s, -c];
            let mut fact = 1.0;
            for i in 0..=k {
                if i > 0 {
                    fact *= i as f64;
                }
                x.0[i] = a * cyc_c[i % 4] / fact;
                y.0[i] = b * cyc_s[i % 4] / fact;
            }
            (x, y)
        };
        match &self.shape {
            Shape::Circle(r) => Some(trig(*r, *r)),
            Shape::Ellipse(a, b) => Some(trig(*a, *b)),
            Shape::Graph(f) => {
                let x = Taylor::constant(u, k).add(&Taylor::var(k));
                let y = match *f {
                    GraphFn::Power { r } => {
                        let ax = u.abs();
                        let sg: f64 = if u < 0.0 { -1.0 } else { 1.0 };
                        let mut y = Taylor::zero(k);
                        let mut binom = 1.0;
                        for i in 0..=k {
                            y.0[i] = binom * sg.powi(i as i32) * ax.powf(r - i as f64);
                            binom *= (r - i as f64) / (i + 1) as f64;
                        }
                        y
                    }
                    GraphFn::Hyperbola { a } => {
                        let mut q = Taylor::zero(k);
                        q.0[0] = a * a + u * u;
                        if k >= 1 {
                            q.0[1] = 2.0 * u;
                        }
                        if k >= 2 {
                            q.0[2] = 1.0;
                        }
                        q.sqrt()
                    }
                };
                Some((x, y))
            }
            Shape::Sampled { .. } => None,
        }
    }

    pub fn contains_u(&self, u: f64) -> bool {
        self.closed || (u >= self.u_lo - 1e-13 && u <= self.u_hi + 1e-13)
    }

    /// Arc length between two native parameters, computed directly so that
    /// short arcs keep full relative precision.
    pub fn arc_between(&self, u0: f64, u1: f64) -> f64 {
        if let Shape::Circle(r) = self.shape {
            return r * (u1 - u0);
        }
        let width = match self.shape {
            Shape::Graph(_) => 0.05 * u0.abs().max(u1.abs()).max(1.0),
            Shape::Sampled { ref u, .. } => (u[1] - u[0]).max(1e-300),
            _ => self.u_period() / 128.0,
        };
        let n = ((u1 - u0).abs() / width).ceil().max(1.0) as usize;
        crate::numeric::gl_composite(|v| self.shape.jet(v).speed(), u0, u1, n)
    }

    fn panel_s(&self, i: usize, u: f64) -> f64 {
        self.cum[i] + gl_panel(|v| self.shape.jet(v).speed(), self.nodes[i], u)
    }

    /// Arc length of native parameter `u` (lifted through periods on closed curves).
    pub fn s_of_u(&self, u: f64) -> f64 {
        if let Shape::Circle(r) = self.shape {
            return r * (u - self.u_lo);
        }
        let p = self.u_period();
        let (k, uu) = if self.closed {
            let k = ((u - self.u_lo) / p).floor();
            (k, u - k * p)
        } else {
            (0.0, u)
        };
        let i = self.nodes.partition_point(|&v| v <= uu).saturating_sub(1).min(self.nodes.len() - 2);
        k * self.length() + self.panel_s(i, uu)
    }

    /// Native parameter of arc length `s`.
    pub fn u_of_s(&self, s: f64) -> Result<f64> {
        let l = self.length();
        if let Shape::Circle(r) = self.shape {
            if !self.closed {
                self.check_s(s)?;
            }
            return Ok(self.u_lo + s / r);
        }
        let (k, ss) = if self.closed {
            let k = (s / l).floor();
            (k, s - k * l)
        } else {
            self.check_s(s)?;
            (0.0, s.clamp(0.0, l))
        };
        let i = self.cum.partition_point(|&v| v <= ss).saturating_sub(1).min(self.cum.len() - 2);
        let (u0, u1) = (self.nodes[i], self.nodes[i + 1]);
        let mut u = u0 + (ss - self.cum[i]) / (self.cum[i + 1] - self.cum[i]) * (u1 - u0);
        for _ in 0..20 {
            let r = self.panel_s(i, u) - ss;
            let du = r / self.shape.jet(u).speed();
            u -= du;
            if du.abs() <= 1e-15 * (1.0 + u.abs()) {
                break;
            }
        }
        Ok(u + k * self.u_period())
    }

    fn check_s(&self, s: f64) -> Result<()> {
        let l = self.length();
        let slack = 1e-12 * l.max(1.0);
        if self.closed || (s >= -slack && s <= l + slack) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { s, lo: 0.0, hi: l })
        }
    }

    pub fn frame(&self, s: f64) -> Result<Frame> {
        let j = self.shape.jet(self.u_of_s(s)?);
        Ok(Frame { pos: j.pos, tangent: j.tangent(), curvature: j.curvature() })
    }
    pub fn position(&self, s: f64) -> Result<Point> {
        Ok(self.frame(s)?.pos)
    }
    pub fn tangent(&self, s: f64) -> Result<Point> {
        Ok(self.frame(s)?.tangent)
    }
    pub fn curvature_at(&self, s: f64) -> Result<f64> {
        Ok(self.frame(s)?.curvature)
    }
    /// `w(s) = 2 sqrt 2 / kappa(s)`, the leading step length per unit `sqrt y`.
    pub fn w(&self, s: f64) -> Result<f64> {
        Ok(2.0 * 2f64.sqrt() / self.curvature_at(s)?)
    }

    /// Tangent azimuth, continuous along the curve (lifted from its value at `s = 0`).
    pub fn azimuth(&self, s: f64) -> Result<f64> {
        let t0 = self.tangent(0.0)?;
        Ok(t0.y.atan2(t0.x) + self.turning(0.0, s)?)
    }

    /// Total turning `int kappa ds` between two arc-length values.
    pub fn turning(&self, s0: f64, s1: f64) -> Result<f64> {
        let (u0, u1) = (self.u_of_s(s0)?, self.u_of_s(s1)?);
        let n = (((u1 - u0).abs() / self.u_period()) * 64.0).ceil().max(1.0) as usize;
        let f = |u: f64| {
            let j = self.shape.jet(u);
            j.curvature() * j.speed()
        };
        Ok(crate::numeric::gl_composite(f, u0, u1, n))
    }

    /// Uniform table `(s, x, y, kappa)` with `n` rows.
    pub fn table(&self, n: usize) -> Vec<[f64; 4]> {
        let l = self.length();
        let last = if self.closed { n } else { n - 1 };
        (0..n)
            .map(|i| {
                let s = l * i as f64 / last.max(1) as f64;
                let f = self.frame(s).expect("in domain");
                [s, f.pos.x, f.pos.y, f.curvature]
            })
            .collect()
    }
}

fn panel_nodes(shape: &Shape, lo: f64, hi: f64, per_unit: usize) -> Vec<f64> {
    match shape {
        Shape::Sampled { u, closed, period, .. } => {
            let mut v: Vec<f64> = u.iter().copied().filter(|&x| x >= lo && x <= hi).collect();
            if v.first().is_none_or(|&x| x > lo) {
                v.insert(0, lo);
            }
            if *closed && v.last().is_none_or(|&x| x < hi) {
                v.push(*period);
            }
            if v.last().is_none_or(|&x| x < hi) {
                v.push(hi);
            }
            v
        }
        Shape::Graph(_) => {
            let mut v = vec![lo];
            let mut x = lo;
            while x < hi {
                let h = 1.0 / per_unit as f64 * 4.0 * x.abs().max(1.0);
                x = (x + h).min(hi);
                v.push(x);
            }
            v
        }
        _ => {
            let n = (((hi - lo) * per_unit as f64).ceil() as usize).max(8);
            (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
        }
    }
}

fn infer_ends(spec: &CurveSpec, shape: &Shape, lo: f64, hi: f64) -> [EndBehavior; 2] {
    match &spec.kind {
        CurveKind::Graph { f, x_min, x_max } => {
            let end = |finite: bool, sign: f64| {
                if finite {
                    EndBehavior::FiniteEndpoint
                } else {
                    match f.slope_limit(sign) {
                        Some(m) => {
                            let d = Point::new(sign, sign * m).normalize();
                            EndBehavior::AsymptoticLine { direction: [d.x, d.y] }
                        }
                        None => EndBehavior::UnboundedNoAsymptote,
                    }
                }
            };
            [end(x_min.is_finite(), -1.0), end(x_max.is_finite(), 1.0)]
        }
        _ => {
            let _ = (shape, lo, hi);
            [EndBehavior::FiniteEndpoint, EndBehavior::FiniteEndpoint]
        }
    }
}
