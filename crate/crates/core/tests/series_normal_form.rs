mod oracles;

use convex_billiards::billiard::Billiard;
use convex_billiards::conjugacy::lazutkin_lengths;
use convex_billiards::normal_form::{build_normal_chart, lazutkin_parameter};
use convex_billiards::series::{InvariantSeries, SeriesConfig};
use convex_billiards::*;
use oracles::*;
use proptest::prelude::*;
use std::sync::OnceLock;

fn cfg(order: usize) -> SeriesConfig {
    SeriesConfig { order, ..SeriesConfig::default() }
}

fn ellipse() -> &'static (ConvexCurve, InvariantSeries) {
    static E: OnceLock<(ConvexCurve, InvariantSeries)> = OnceLock::new();
    E.get_or_init(|| {
        let c = build_curve(&CurveSpec::ellipse(2.0, 1.0)).unwrap();
        let s = InvariantSeries::build(&c, &cfg(3)).unwrap();
        (c, s)
    })
}

/// Taylor coefficients of `h(y) / y` at 0 from a polynomial fit on small `y`.
fn fitted_coefficients(h: impl Fn(f64) -> f64, m: usize) -> Vec<f64> {
    let n = 2 * m + 4;
    let ys: Vec<f64> = (1..=n).map(|i| 0.02 * i as f64 / n as f64).collect();
    let a = nalgebra::DMatrix::from_fn(n, m + 3, |i, j| ys[i].powi(j as i32));
    let b = nalgebra::DVector::from_iterator(n, ys.iter().map(|&y| h(y) / y));
    let sol = a.svd(true, true).solve(&b, 1e-15).unwrap();
    sol.iter().take(m).copied().collect()
}

#[test]
fn circle_coefficients_match_closed_form() {
    let fit = fitted_coefficients(|y| circle_h(1.0, y), 3);
    let expected = [2.0, 1.0 / 15.0, 16.0 / 1575.0];
    for (f, e) in fit.iter().zip(expected) {
        assert!((f - e).abs() < 1e-7 * e.abs().max(1.0), "{f} vs {e}");
    }
    let c = build_curve(&CurveSpec::circle(1.0)).unwrap();
    let ser = InvariantSeries::build(&c, &cfg(3)).unwrap();
    for s in [0.0, 1.0, 2.5, 5.0] {
        let h = ser.h_coeffs(s);
        for (hk, e) in h.iter().zip(expected) {
            assert!((hk / e - 1.0).abs() < 1e-6, "s {s}: {hk} vs {e}");
        }
    }
    let y = 1e-2;
    assert!((ser.h_value(0.3, y) - circle_h(1.0, y)).abs() < 1e-7);
}

#[test]
fn circle_coefficients_scale_with_radius() {
    let c = build_curve(&CurveSpec::circle(8.0)).unwrap();
    let ser = InvariantSeries::build(&c, &cfg(2)).unwrap();
    let fit = fitted_coefficients(|y| circle_h(8.0, y), 2);
    for (hk, e) in ser.h_coeffs(1.0).iter().zip(fit) {
        assert!((hk / e - 1.0).abs() < 1e-6);
    }
}

#[test]
fn leading_coefficient_is_w_to_two_thirds() {
    let (_, ser) = ellipse();
    for (g, w) in ser.g[0].iter().zip(&ser.w) {
        assert!((g - w.powf(2.0 / 3.0)).abs() < 1e-8);
    }
}

#[test]
fn area_preservation_fixes_q() {
    let (_, ser) = ellipse();
    let (a, b) = (2.0f64, 1.0f64);
    // w = 2 sqrt 2 / kappa with kappa(u) = ab / (a^2 sin^2 + b^2 cos^2)^{3/2}
    let w_u = |u: f64| {
        let r = a * a * u.sin().powi(2) + b * b * u.cos().powi(2);
        2.0 * 2f64.sqrt() * r.powf(1.5) / (a * b)
    };
    let speed = |u: f64| (a * a * u.sin().powi(2) + b * b * u.cos().powi(2)).sqrt();
    let q = ser.jets.q();
    let mut worst: f64 = 0.0;
    for (i, &s) in ser.s.iter().enumerate() {
        // u from s by bisection on the independent arc length
        let (mut lo, mut hi) = (0.0, 2.0 * std::f64::consts::PI);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if simpson(speed, 0.0, mid, 400) < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let u = 0.5 * (lo + hi);
        let e = 1e-5;
        let wp = (w_u(u + e) - w_u(u - e)) / (2.0 * e) / speed(u);
        let target = -2.0 / 3.0 * wp;
        worst = worst.max((q[i] - target).abs() / wp.abs().max(0.05));
    }
    assert!(worst < 0.02, "relative q error {worst}");
}

#[test]
fn coefficients_do_not_depend_on_grid() {
    let c = build_curve(&CurveSpec::ellipse(2.0, 1.0)).unwrap();
    let finer = InvariantSeries::build(&c, &SeriesConfig { grid_n: 512, ..cfg(3) }).unwrap();
    let (_, fine) = ellipse();
    for s in [0.1, 1.7, 4.0, 8.8] {
        for (a, b) in finer.h_coeffs(s).iter().zip(fine.h_coeffs(s)) {
            assert!((a - b).abs() < 1e-6 * b.abs().max(1.0));
        }
    }
}

#[test]
fn defect_slope_grows_with_order() {
    let c = build_curve(&CurveSpec::ellipse(2.0, 1.0)).unwrap();
    let ys = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];
    for n in 1..=3 {
        let ser = InvariantSeries::build(&c, &cfg(n)).unwrap();
        let (slope, _) = ser.defect_slope(&c, &ys, 32).unwrap();
        assert!(slope >= n as f64 + 0.7, "order {n}: slope {slope}");
    }
}

#[test]
fn open_arc_defect_ignores_images_off_the_sub_arc() {
    let c = build_curve(&CurveSpec::ellipse(2.0, 1.0).with_window(0.2, 2.0)).unwrap();
    let (lo, hi) = c.s_domain();
    let q = 0.25 * (hi - lo);
    let cfg = SeriesConfig { sub_arc: Some((lo + q, hi - q)), profile_y_max: 1e-4, ..cfg(3) };
    let ser = InvariantSeries::build(&c, &cfg).unwrap();
    let ys = [1e-3, 2e-3, 3e-3, 5e-3];
    let (slope, d) = ser.defect_slope(&c, &ys, 32).unwrap();
    assert!(d.iter().all(|v| *v < 1e-8), "{d:?}");
    assert!(slope >= 3.7, "{slope}");
}

#[test]
fn order_limits() {
    let c = build_curve(&CurveSpec::circle(1.0)).unwrap();
    assert!(matches!(InvariantSeries::build(&c, &cfg(13)), Err(Error::OrderTooHigh(13))));
    assert!(InvariantSeries::build(&c, &cfg(0)).is_err());
}

#[test]
fn lazutkin_parameter_spans_half_the_length() {
    let (c, _) = ellipse();
    let t = lazutkin_parameter(c, 0.0, c.length()).unwrap();
    let l = lazutkin_lengths(c).unwrap().total().unwrap();
    assert!((t - 0.5 * l).abs() < 1e-8);
    let circ = build_curve(&CurveSpec::circle(1.0)).unwrap();
    let o = circle_oracle(1.0, 2.0, 0.1);
    assert!((lazutkin_parameter(&circ, 0.0, 2.0).unwrap() - o.t_l).abs() < 1e-12);
}

#[test]
fn circle_chart_conjugates_step() {
    let c = build_curve(&CurveSpec::circle(1.0)).unwrap();
    let ser = InvariantSeries::build(&c, &cfg(3)).unwrap();
    let ch = build_normal_chart(&ser, None, None).unwrap();
    let b = Billiard::new(&c);
    for &(s, y) in &[(0.2, 1e-4), (1.0, 1e-3), (3.0, 1e-2)] {
        let (t, h) = ch.forward(s, y).unwrap();
        let (s2, y2) = ch.inverse(t + h.sqrt(), h).unwrap();
        let (sd, yd) = b.step_sy(s, y).unwrap();
        assert!((s2 - sd).abs() < 1e-8 && (y2 - yd).abs() < 1e-8);
    }
}

#[test]
fn ellipse_chart_quality() {
    let (c, ser) = ellipse();
    let ch = build_normal_chart(ser, None, None).unwrap();
    assert!(ch.y_max >= 1e-2);
    for y in [1e-4, 1e-3, 1e-2] {
        assert!((ch.jacobian_det(1.3, y).unwrap() - 1.0).abs() < 1e-3);
        let (dt, _) = ch.orbit_defect(c, 1.3, y, 50).unwrap();
        assert!(dt < 10.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chart_round_trip(s in 0.0f64..9.6, ly in -4.0f64..-2.0) {
        let (_, ser) = ellipse();
        let ch = build_normal_chart(ser, None, None).unwrap();
        let y = 10f64.powf(ly);
        let (t, h) = ch.forward(s, y).unwrap();
        let (s2, y2) = ch.inverse(t, h).unwrap();
        prop_assert!((s2 - s).abs() < 1e-10 && (y2 / y - 1.0).abs() < 1e-10);
    }

    #[test]
    fn level_solve_inverts_h(s in 0.0f64..9.6, ly in -5.0f64..-2.0) {
        let (_, ser) = ellipse();
        let y = 10f64.powf(ly);
        let y2 = ser.y_on_level(s, ser.h_value(s, y));
        prop_assert!((y2 / y - 1.0).abs() < 1e-12);
    }
}
