//! Lazutkin lengths and conjugacy of billiards near the boundary.

use crate::curve::{ConvexCurve, CurveKind, EndBehavior, GraphFn};
use crate::error::{Error, Result};
use crate::normal_form::lazutkin_parameter;
use crate::numeric::{integrate_adaptive, linear_fit};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Toward the start of the arc-length interval.
    Backward,
    /// Toward its end.
    Forward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ClosedWindow,
    TailExtrapolation,
    EndBehaviorRule,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Convergence {
    Convergent(f64),
    Divergent,
}

impl Convergence {
    pub fn is_finite(&self) -> bool {
        matches!(self, Convergence::Convergent(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LazutkinLengthReport {
    pub direction: Direction,
    pub verdict: Convergence,
    pub method: Method,
    /// Tail exponent `nu` of `kappa^{2/3} ds ~ x^nu dx`, when one was used.
    pub tail_exponent: Option<f64>,
}

/// Both halves of a curve, split at the middle of its parameter range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LazutkinLength {
    pub backward: LazutkinLengthReport,
    pub forward: LazutkinLengthReport,
}

impl LazutkinLength {
    pub fn total(&self) -> Option<f64> {
        match (self.backward.verdict, self.forward.verdict) {
            (Convergence::Convergent(a), Convergence::Convergent(b)) => Some(a + b),
            _ => None,
        }
    }
}

/// `kappa^{2/3} ds / dx` for a graph `y = f(x)`.
fn graph_density(f: &GraphFn, x: f64) -> f64 {
    let [_, d1, d2, _] = f.eval(x);
    d2.abs().powf(2.0 / 3.0) / (1.0 + d1 * d1).sqrt()
}

fn graph_split(x_min: f64, x_max: f64) -> f64 {
    match (x_min.is_finite(), x_max.is_finite()) {
        (true, true) => 0.5 * (x_min + x_max),
        (true, false) => x_min + 1.0,
        (false, true) => x_max - 1.0,
        (false, false) => 0.0,
    }
}

/// Integral of the density from `x0` to infinity in the direction `sign`,
/// with power-law tail correction. `nu` is the tail exponent when known.
fn tail_integral(density: &dyn Fn(f64) -> f64, x0: f64, sign: f64, nu: Option<f64>) -> Result<(Convergence, Method, f64)> {
    let mut acc: f64 = 0.0;
    let mut a = 0.0;
    let mut b = 1.0;
    let mut xs = vec![];
    let mut pieces = vec![];
    for _ in 0..24 {
        let piece = integrate_adaptive(|t| density(x0 + sign * t), a, b, 1e-14 * (1.0 + acc.abs()))?;
        acc += piece;
        xs.push(b.ln());
        pieces.push(piece.abs().max(f64::MIN_POSITIVE).ln());
        a = b;
        b *= 2.0;
    }
    // piece over [X, 2X] scales like X^{nu + 1}
    let k = xs.len();
    let (slope, _, resid) = linear_fit(&xs[k - 8..], &pieces[k - 8..]);
    let band = 0.05f64.max(3.0 * resid);
    let (nu, method) = match nu {
        Some(n) => (n, Method::EndBehaviorRule),
        None => {
            if (slope).abs() <= band {
                return Err(Error::Inconclusive(format!("tail exponent {:.3} within {band:.3} of -1", slope - 1.0)));
            }
            (slope - 1.0, Method::TailExtrapolation)
        }
    };
    if nu >= -1.0 {
        return Ok((Convergence::Divergent, method, nu));
    }
    let x = a;
    let c = density(x0 + sign * x) / x.powf(nu);
    acc += -c * x.powf(nu + 1.0) / (nu + 1.0);
    Ok((Convergence::Convergent(acc), method, nu))
}

fn graph_end(f: &GraphFn, from: f64, to: f64, behavior: Option<&EndBehavior>) -> Result<(Convergence, Method, Option<f64>)> {
    if to.is_finite() {
        let (lo, hi) = if from < to { (from, to) } else { (to, from) };
        let v = integrate_adaptive(|x| graph_density(f, x), lo, hi, 1e-14)?;
        return Ok((Convergence::Convergent(v), Method::ClosedWindow, None));
    }
    let sign = to.signum();
    let nu = match f {
        GraphFn::Power { r } => Some(-(r + 1.0) / 3.0),
        GraphFn::Hyperbola { .. } => Some(-2.0),
    };
    if let Some(EndBehavior::AsymptoticLine { .. }) = behavior {
        let (v, _, nu) = tail_integral(&|x| graph_density(f, x), from, sign, nu)?;
        debug_assert!(v.is_finite());
        return Ok((v, Method::EndBehaviorRule, Some(nu)));
    }
    let (v, m, nu) = tail_integral(&|x| graph_density(f, x), from, sign, nu)?;
    Ok((v, m, Some(nu)))
}

/// Lazutkin length `int kappa^{2/3} ds` in one direction from the middle of
/// the parameter range.
pub fn lazutkin_length(curve: &ConvexCurve, direction: Direction) -> Result<LazutkinLengthReport> {
    let back = direction == Direction::Backward;
    if let CurveKind::Graph { f, x_min, x_max } = &curve.spec().kind {
        if curve.spec().window.is_none() {
            let mid = graph_split(*x_min, *x_max);
            let ends = curve.ends();
            let (to, beh) = if back { (*x_min, ends.map(|e| &e[0])) } else { (*x_max, ends.map(|e| &e[1])) };
            let (verdict, method, tail_exponent) = graph_end(f, mid, to, beh)?;
            return Ok(LazutkinLengthReport { direction, verdict, method, tail_exponent });
        }
    }
    let (u0, u1) = curve.u_range();
    let um = 0.5 * (u0 + u1);
    let (a, b) = if back { (u0, um) } else { (um, u1) };
    let v = integrate_adaptive(
        |u| {
            let j = curve.jet_u(u);
            j.curvature().powf(2.0 / 3.0) * j.speed()
        },
        a,
        b,
        1e-14,
    )?;
    Ok(LazutkinLengthReport { direction, verdict: Convergence::Convergent(v), method: Method::ClosedWindow, tail_exponent: None })
}

pub fn lazutkin_lengths(curve: &ConvexCurve) -> Result<LazutkinLength> {
    Ok(LazutkinLength {
        backward: lazutkin_length(curve, Direction::Backward)?,
        forward: lazutkin_length(curve, Direction::Forward)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// Both lengths finite.
    I,
    /// Both infinite with the same divergence pattern.
    II,
    Neither,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugacyVerdict {
    pub smooth_conjugate: bool,
    pub condition: Condition,
    pub symplectic_conjugate: bool,
    /// `H_1(s, 0) = alpha t_L(s) + beta`.
    pub alpha: f64,
    pub beta: f64,
    pub lengths: [Option<f64>; 2],
}

/// Relative tolerance for calling two finite lengths equal.
pub const LENGTH_EQUALITY_TOL: f64 = 1e-8;

pub fn classify_conjugacy(l1: &LazutkinLength, l2: &LazutkinLength) -> Result<ConjugacyVerdict> {
    let pat = |l: &LazutkinLength| (l.backward.verdict.is_finite(), l.forward.verdict.is_finite());
    let (p1, p2) = (pat(l1), pat(l2));
    let (t1, t2) = (l1.total(), l2.total());
    let mut v = ConjugacyVerdict {
        smooth_conjugate: false,
        condition: Condition::Neither,
        symplectic_conjugate: false,
        alpha: 1.0,
        beta: 0.0,
        lengths: [t1, t2],
    };
    match (t1, t2) {
        (Some(a), Some(b)) => {
            v.smooth_conjugate = true;
            v.condition = Condition::I;
            v.alpha = b / a;
            v.symplectic_conjugate = (a - b).abs() <= LENGTH_EQUALITY_TOL * a.max(b);
        }
        (None, None) if p1 == p2 => {
            v.smooth_conjugate = true;
            v.condition = Condition::II;
            v.symplectic_conjugate = true;
        }
        _ => {}
    }
    Ok(v)
}

/// Verdict for two curves; failures in the length computation surface as
/// `InconclusiveInput`.
pub fn classify_curves(c1: &ConvexCurve, c2: &ConvexCurve) -> Result<ConjugacyVerdict> {
    let get = |c: &ConvexCurve| lazutkin_lengths(c).map_err(|e| Error::InconclusiveInput(e.to_string()));
    classify_conjugacy(&get(c1)?, &get(c2)?)
}

/// `s -> H_1(s, 0) = t_L2^{-1}(alpha t_L1(s) + beta)`, with both Lazutkin
/// parameters measured from the start of the arc-length interval.
pub struct BoundaryMap<'a> {
    pub c1: &'a ConvexCurve,
    pub c2: &'a ConvexCurve,
    pub alpha: f64,
    pub beta: f64,
}

pub fn boundary_conjugating_map<'a>(c1: &'a ConvexCurve, c2: &'a ConvexCurve, verdict: &ConjugacyVerdict) -> Result<BoundaryMap<'a>> {
    if !verdict.smooth_conjugate {
        return Err(Error::VerdictNegative);
    }
    Ok(BoundaryMap { c1, c2, alpha: verdict.alpha, beta: verdict.beta })
}

impl BoundaryMap<'_> {
    pub fn eval(&self, s: f64) -> Result<f64> {
        let target = self.alpha * lazutkin_parameter(self.c1, 0.0, s)? + self.beta;
        let dens = |c: &ConvexCurve, s: f64| -> Result<f64> {
            let sw = if c.is_closed() { s.rem_euclid(c.length()) } else { s };
            Ok(0.5 * c.curvature_at(sw)?.powf(2.0 / 3.0))
        };
        let mut x = s * self.c2.length() / self.c1.length();
        for _ in 0..60 {
            if !self.c2.is_closed() {
                x = x.clamp(0.0, self.c2.length());
            }
            let dx = (lazutkin_parameter(self.c2, 0.0, x)? - target) / dens(self.c2, x)?;
            x -= dx;
            if dx.abs() < 1e-13 * (1.0 + x.abs()) {
                return Ok(x);
            }
        }
        Err(Error::RootFindFailure(format!("boundary map at s = {s}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{build_curve, CurveSpec};

    #[test]
    fn power_tails_follow_exponent_rule() {
        for (r, finite) in [(1.5, false), (2.0, false), (2.5, true), (3.0, true)] {
            let c = build_curve(&CurveSpec::graph(GraphFn::Power { r }, 1.0, f64::INFINITY)).unwrap();
            let rep = lazutkin_length(&c, Direction::Forward).unwrap();
            assert_eq!(rep.verdict.is_finite(), finite, "r = {r}");
        }
    }

    #[test]
    fn tail_fit_without_exponent() {
        let (v, m, nu) = tail_integral(&|x: f64| (1.0 + x).powf(-2.5), 0.0, 1.0, None).unwrap();
        assert_eq!(m, Method::TailExtrapolation);
        assert!((nu + 2.5).abs() < 1e-3);
        match v {
            Convergence::Convergent(x) => assert!((x - 1.0 / 1.5).abs() < 1e-6),
            _ => panic!(),
        }
        assert!(tail_integral(&|x: f64| 1.0 / (1.0 + x), 0.0, 1.0, None).is_err());
    }
}
