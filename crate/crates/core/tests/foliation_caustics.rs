mod oracles;

use convex_billiards::billiard::{phi_of_y, y_of_phi, Billiard};
use convex_billiards::caustics::*;
use convex_billiards::foliation::*;
use convex_billiards::lines::OrientedLine;
use convex_billiards::normal_form::{build_normal_chart, NormalChart};
use convex_billiards::series::{InvariantSeries, SeriesConfig};
use convex_billiards::*;
use oracles::*;
use proptest::prelude::*;
use std::sync::OnceLock;

struct Setup {
    curve: ConvexCurve,
    chart: NormalChart,
}

fn setup(spec: CurveSpec) -> Setup {
    let curve = build_curve(&spec).unwrap();
    let ser = InvariantSeries::build(&curve, &SeriesConfig::default()).unwrap();
    let chart = build_normal_chart(&ser, None, None).unwrap();
    Setup { curve, chart }
}

fn ellipse() -> &'static Setup {
    static E: OnceLock<Setup> = OnceLock::new();
    E.get_or_init(|| setup(CurveSpec::ellipse(2.0, 1.0)))
}

fn circle() -> &'static Setup {
    static C: OnceLock<Setup> = OnceLock::new();
    C.get_or_init(|| setup(CurveSpec::circle(1.0)))
}

fn footpoints(st: &Setup, n: usize, frac: f64) -> Vec<f64> {
    let l = st.curve.length();
    (0..n).map(|i| st.chart.s0 - 0.5 * frac * l + frac * l * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn certificate_agrees_with_bruteforce() {
    let st = ellipse();
    let step = |t: f64, h: f64| st.chart.step(&st.curve, t, h);
    let w = Window { tau: (0.1, 0.5), h: (1e-4, 1e-2) };
    let field = FoliationField::Base;
    let cert = field.certify(&step, &w, 3, 4).unwrap();
    let ratio = (w.h.1 / w.h.0).powf(1.0 / 3.0);
    let mut grid = vec![];
    for b in 0..3 {
        let lo = w.h.0 * ratio.powi(b);
        grid.extend(Window { tau: w.tau, h: (lo, lo * ratio) }.grid(2, 4));
    }
    let brute = bruteforce_invariance(|_, h| h, |t, h| step(t, h).ok(), &grid);
    let c = cert.max_defect();
    assert!(brute <= 2.0 * c && c <= 2.0 * brute, "cert {c} brute {brute}");
}

#[test]
fn model_map_extension_is_exact() {
    let m = ModelMap;
    let g = glue_on_sector(&m, 0.3, 0.05, 0.2, 0.0).unwrap();
    let field = FoliationField::Extended { gluing: g, map: &m, max_steps: 100_000 };
    let grid = Window { tau: (0.3, 2.0), h: (1e-4, 1e-2) }.grid(4, 3);
    let d = bruteforce_invariance(|t, h| field.value(t, h).unwrap(), |t, h| Some((t + h.sqrt(), h)), &grid);
    assert!(d < 1e-15, "{d}");
}

#[test]
fn circle_leaves_are_constant_angle() {
    let st = circle();
    let map = BilliardChartMap { chart: &st.chart, curve: &st.curve };
    let (tau0, _) = st.chart.forward(st.chart.s0, 1e-3).unwrap();
    let g = glue_on_sector(&map, 0.3, 0.05, 0.1, tau0).unwrap();
    let fields = [FoliationField::Base, FoliationField::Extended { gluing: g, map: &map, max_steps: 10_000 }];
    for f in &fields {
        for level in [1e-3, 4e-3] {
            let ys: Vec<f64> = footpoints(st, 9, 0.1).iter().map(|&s| leaf_y(&st.chart, f, s, level).unwrap()).collect();
            let spread = ys.iter().fold(0.0f64, |a, y| a.max((y - ys[0]).abs()));
            assert!(spread < 1e-8, "spread {spread}");
        }
    }
}

#[test]
fn extension_certificate_on_ellipse() {
    let st = ellipse();
    let map = BilliardChartMap { chart: &st.chart, curve: &st.curve };
    let (tau0, _) = st.chart.forward(st.chart.s0, 1e-3).unwrap();
    let g = glue_on_sector(&map, 0.3, 0.05, 0.1, tau0).unwrap();
    let step = |t: f64, h: f64| st.chart.step(&st.curve, t, h);
    let w = Window { tau: (tau0 + 0.2, tau0 + 0.4), h: (1e-3, 4e-3) };
    let (_, cert) = extend_by_dynamics(g, &map, &step, &w, 10_000).unwrap();
    assert!(cert.max_defect() < 1e-10);
    assert!(cert.max_n_phi < 5.0);
    assert!(cert.min_dg_dh > 0.5);
}

#[test]
fn oversized_sector_is_rejected() {
    let st = ellipse();
    let map = BilliardChartMap { chart: &st.chart, curve: &st.curve };
    assert!(matches!(glue_on_sector(&map, 0.3, 0.05, 0.5, 0.0), Err(Error::SectorTooLarge(_))));
}

#[test]
fn steep_perturbation_loses_gradient() {
    let st = ellipse();
    let psi = FlatPerturbation::new(0.12, 100.0).unwrap();
    let w = Window { tau: (0.0, 0.5), h: (1e-3, 1e-2) };
    assert!(matches!(perturbed_family(&st.chart, psi, &[1.0], &w), Err(Error::GradientLoss(_))));
    assert!(FlatPerturbation::new(0.2, 1.0).is_err());
}

#[test]
fn perturbation_is_flat() {
    let psi = FlatPerturbation::new(0.1, 10.0).unwrap();
    for &h in &[1e-4, 5e-5, 1e-5] {
        assert!(h <= 1e-3 / psi.c);
        for t in [0.1, 0.3] {
            assert!(psi.eval(t, h).abs() < 1e-12 && psi.d_h(t, h).abs() < 1e-12);
        }
    }
}

#[test]
fn perturbed_leaves_are_distinct() {
    let st = ellipse();
    let psi = FlatPerturbation::new(1e-2, 10.0).unwrap();
    let w = Window { tau: (-2.0, 2.0), h: (1e-4, 1e-2) };
    let fam = perturbed_family(&st.chart, psi, &[0.0, 0.5, 1.0], &w).unwrap();
    let h = 1e-2;
    assert!(h >= psi.visible_from());
    for centre in [-1.0, 0.0, 1.0] {
        for i in 0..fam.len() {
            for j in i + 1..fam.len() {
                let best = (0..16)
                    .map(|k| centre + 0.01 * k as f64)
                    .map(|t| (fam[i].value(t, h).unwrap() - fam[j].value(t, h).unwrap()).abs())
                    .fold(0.0, f64::max);
                assert!(best > 0.0);
            }
        }
    }
}

#[test]
fn circle_caustic_radius() {
    let st = circle();
    for y in [1e-3, 1e-2] {
        let level = st.chart.series.h_value(0.0, y);
        let c = leaf_caustic(&st.curve, &st.chart, &FoliationField::Base, level, &footpoints(st, 50, 0.5), 1e-3).unwrap();
        let r = circle_oracle(1.0, 0.0, phi_of_y(y)).caustic_radius;
        for p in &c.points {
            assert!((p.norm() - r).abs() < 1e-8);
        }
    }
}

#[test]
fn ellipse_caustics_are_confocal_and_symmetric() {
    let st = ellipse();
    let psi = FlatPerturbation::new(1e-2, 10.0).unwrap();
    let fields = [FoliationField::Base, FoliationField::Perturbed { psi, eps: 1.0 }];
    let th = footpoints(st, 800, 0.9);
    for f in &fields {
        let mut leaves = vec![];
        for level in [1e-2, 1e-3, 1e-4] {
            let c = leaf_caustic(&st.curve, &st.chart, f, level, &th, 1e-3).unwrap();
            let lam: Vec<f64> = c.points.iter().map(|p| ellipse_point_lambda(2.0, 1.0, [p.x, p.y]).unwrap()).collect();
            let mean = lam.iter().sum::<f64>() / lam.len() as f64;
            let res = lam.iter().fold(0.0f64, |a, l| a.max((l - mean).abs()));
            assert!(res < 1e-4, "level {level}: residual {res}");
            let rep = tangency_validate(&st.curve, &c, &footpoints(st, 12, 0.6)).unwrap();
            assert!(rep.max_defect() < 1e-6, "level {level}: {}", rep.max_defect());
            leaves.push(c);
        }
        let fol = assemble_caustic_foliation(&st.curve, leaves, &footpoints(st, 12, 0.6)).unwrap();
        assert!(fol.depth.windows(2).all(|d| d[0] < d[1]));
    }
}

#[test]
fn crossing_leaves_are_reported() {
    let st = ellipse();
    let th = footpoints(st, 200, 0.5);
    let a = leaf_caustic(&st.curve, &st.chart, &FoliationField::Base, 1e-3, &th, 1e-3).unwrap();
    let mut b = a.clone();
    b.level = 2e-3;
    let probes = footpoints(st, 5, 0.3);
    assert!(matches!(assemble_caustic_foliation(&st.curve, vec![a, b], &probes), Err(Error::LeavesCross(_))));
}

#[test]
fn dual_plane_hessian_does_not_vanish() {
    let st = ellipse();
    let f = FoliationField::Base;
    let g = dual_field(&st.curve, &st.chart, &f);
    let mut pts = vec![];
    for s in [1.0, 2.0, 3.0, 7.0] {
        for y in [1e-3, 1e-2] {
            let line = phase_line(&st.curve, s, phi_of_y(y)).unwrap();
            let x = dual_of_line(&line.reversed(), st.curve.origin()).unwrap();
            pts.push((x.x, x.y));
        }
    }
    let rep = hessian_convexity(&g, &pts, 1e-4, 1e-9).unwrap();
    assert!(rep.failures.is_empty() && rep.sign != 0);
}

#[test]
fn confocal_lambda_constant_on_billiard_chords() {
    let st = ellipse();
    let b = Billiard::new(&st.curve);
    let (mut s, mut phi) = (0.3f64, 0.2f64);
    let first = {
        let f = st.curve.frame(s).unwrap();
        let d = f.tangent * phi.cos() + f.normal() * phi.sin();
        ellipse_lambda(2.0, 1.0, [f.pos.x, f.pos.y], [d.x, d.y])
    };
    for _ in 0..200 {
        (s, phi) = b.step_sphi(s, phi).unwrap();
        let f = st.curve.frame(s).unwrap();
        let d = f.tangent * phi.cos() + f.normal() * phi.sin();
        assert!((ellipse_lambda(2.0, 1.0, [f.pos.x, f.pos.y], [d.x, d.y]) - first).abs() < 1e-9);
    }
    assert!(y_of_phi(phi) > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn point_duality_is_an_involution(x in -3.0f64..3.0, y in -3.0f64..3.0) {
        prop_assume!(x.hypot(y) > 1e-3);
        let o = Point::new(0.0, 0.0);
        let p = Point::new(x, y);
        let back = dual_of_line(&dual_of_point(p, o).unwrap(), o).unwrap();
        prop_assert!((back - p).norm() < 1e-12 * (1.0 + p.norm()));
    }

    #[test]
    fn dual_point_lies_on_polar(phi in 0.0f64..6.28, p in 0.1f64..5.0) {
        let o = Point::new(0.0, 0.0);
        let l = OrientedLine { phi_az: phi, p };
        let x = dual_of_line(&l, o).unwrap();
        // pole and polar: x . n = 1 / p, so x is the foot scaled by 1 / p^2
        prop_assert!((x - l.foot(o) / (p * p)).norm() < 1e-12);
    }

    #[test]
    fn smooth_step_is_monotone(a in -0.5f64..1.5, b in -0.5f64..1.5) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(smooth_step(lo) <= smooth_step(hi));
    }
}
