//! Acceptance criteria: one PASS/FAIL line per criterion with the measured
//! values, the pinned thresholds and the wall time against its budget.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use convex_billiards::billiard::Billiard;
use convex_billiards::caustics::{leaf_caustic, leaf_y, tangency_validate};
use convex_billiards::conjugacy::{classify_curves, lazutkin_length, Condition, Convergence, Direction};
use convex_billiards::foliation::{glue_on_sector, perturbed_family, BilliardChartMap, FlatPerturbation, FoliationField, Window};
use convex_billiards::normal_form::{build_normal_chart, lazutkin_parameter, NormalChart};
use convex_billiards::numeric::{geomspace, linspace, loglog_slope};
use convex_billiards::series::{InvariantSeries, SeriesConfig};
use convex_billiards::*;
use oracles::*;

const INF: f64 = f64::INFINITY;

type Outcome = std::result::Result<(bool, String), String>;

fn ellipse() -> ConvexCurve {
    build_curve(&CurveSpec::ellipse(2.0, 1.0)).unwrap()
}

fn circle() -> ConvexCurve {
    build_curve(&CurveSpec::circle(1.0)).unwrap()
}

fn cubic_arc() -> ConvexCurve {
    build_curve(&CurveSpec::graph(GraphFn::Power { r: 3.0 }, 0.5, 2.0)).unwrap()
}

fn chart_of(c: &ConvexCurve, order: usize) -> NormalChart {
    let ser = InvariantSeries::build(c, &SeriesConfig { order, ..SeriesConfig::default() }).unwrap();
    build_normal_chart(&ser, None, None).unwrap()
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

/// Jacobian determinant of the step by fourth-order central differences.
fn det_fd(b: &Billiard, s: f64, y: f64) -> Option<f64> {
    let (hs, hy) = (1e-4, 1e-3 * y);
    let f = |a: f64, v: f64| b.step_sy(a, v).ok();
    let d = |p: [Option<(f64, f64)>; 4], h: f64| -> Option<(f64, f64)> {
        let [m2, m1, p1, p2] = p;
        let (m2, m1, p1, p2) = (m2?, m1?, p1?, p2?);
        let g = |a: f64, b: f64, c: f64, d: f64| (a - 8.0 * b + 8.0 * c - d) / (12.0 * h);
        Some((g(m2.0, m1.0, p1.0, p2.0), g(m2.1, m1.1, p1.1, p2.1)))
    };
    let ds = d([f(s - 2.0 * hs, y), f(s - hs, y), f(s + hs, y), f(s + 2.0 * hs, y)], hs)?;
    let dy = d([f(s, y - 2.0 * hy), f(s, y - hy), f(s, y + hy), f(s, y + 2.0 * hy)], hy)?;
    Some(ds.0 * dy.1 - dy.0 * ds.1)
}

fn c1_symplectic() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for c in [circle(), ellipse(), cubic_arc()] {
        let b = Billiard::new(&c);
        let (lo, hi) = c.s_domain();
        for s in linspace(lo + 0.01 * (hi - lo), hi - 0.01 * (hi - lo), 50) {
            for y in geomspace(1e-4, 0.3, 50) {
                if let Some(d) = det_fd(&b, s, y) {
                    worst = worst.max((d - 1.0).abs());
                    n += 1;
                }
            }
        }
    }
    Ok((worst < 1e-6 && n >= 5000, format!("max|det J - 1| = {worst:.2e} (< 1e-6) over {n} grid points")))
}

/// Curvature from the position alone, per curve family.
fn oracle_kappa(kind: usize, p: Point) -> f64 {
    match kind {
        0 => 1.0,
        1 => {
            let u = (p.y / 1.0).atan2(p.x / 2.0);
            2.0 / (4.0 * u.sin().powi(2) + u.cos().powi(2)).powf(1.5)
        }
        _ => 6.0 * p.x / (1.0 + 9.0 * p.x.powi(4)).powf(1.5),
    }
}

fn c2_twist() -> Outcome {
    let ys = geomspace(1e-6, 1e-3, 7);
    let (mut slope_dev, mut pref_dev): (f64, f64) = (0.0, 0.0);
    for (kind, c) in [circle(), ellipse(), cubic_arc()].into_iter().enumerate() {
        let b = Billiard::new(&c);
        let (lo, hi) = c.s_domain();
        // on the cubic arc the curvature collapses toward the far end and the
        // O(y) term (proportional to w') dominates the window; sample where kappa >= 0.5
        let far = if c.is_closed() { 0.95 } else { 0.06 };
        for s in linspace(lo + 0.02 * (hi - lo), lo + far * (hi - lo), 10) {
            let adv: Vec<f64> = ys.iter().map(|&y| b.step_sy(s, y).map(|r| r.0 - s)).collect::<Result<_>>().map_err(e)?;
            slope_dev = slope_dev.max((loglog_slope(&ys, &adv) - 0.5).abs());
            let kappa = oracle_kappa(kind, c.position(s).map_err(e)?);
            let pref = adv[0] / ys[0].sqrt();
            pref_dev = pref_dev.max((pref * kappa / (2.0 * 2f64.sqrt()) - 1.0).abs());
        }
    }
    Ok((
        slope_dev <= 0.02 && pref_dev <= 0.01,
        format!("max|slope - 0.5| = {slope_dev:.2e} (<= 0.02), max prefactor rel. err = {pref_dev:.2e} (<= 0.01), 30 points"),
    ))
}

fn c3_q_constraint() -> Outcome {
    let c = ellipse();
    let ser = InvariantSeries::build(&c, &SeriesConfig::default()).map_err(e)?;
    let (a, b) = (2.0f64, 1.0f64);
    let w_u = |u: f64| 2.0 * 2f64.sqrt() * (a * a * u.sin().powi(2) + b * b * u.cos().powi(2)).powf(1.5) / (a * b);
    let speed = |u: f64| (a * a * u.sin().powi(2) + b * b * u.cos().powi(2)).sqrt();
    let q = ser.jets.q();
    let mut worst: f64 = 0.0;
    for (i, &s) in ser.s.iter().enumerate() {
        let p = c.position(s).map_err(e)?;
        let u = (p.y / b).atan2(p.x / a);
        let h = 1e-5;
        let wp = (w_u(u + h) - w_u(u - h)) / (2.0 * h) / speed(u);
        worst = worst.max((q[i] + 2.0 / 3.0 * wp).abs() / wp.abs().max(0.05));
    }
    Ok((worst < 0.02, format!("max rel. |q + (2/3) w'| = {worst:.2e} (< 0.02) over {} nodes", ser.s.len())))
}

fn c4_flatness() -> Outcome {
    let ys = geomspace(1e-4, 1e-2, 5);
    let mut ok = true;
    let mut parts = vec![];
    for (name, c) in [("circle", circle()), ("ellipse", ellipse())] {
        for n in 1..=3 {
            let ser = InvariantSeries::build(&c, &SeriesConfig { order: n, ..SeriesConfig::default() }).map_err(e)?;
            let (slope, d) = ser.defect_slope(&c, &ys, 32).map_err(e)?;
            let worst = d.iter().cloned().fold(0.0, f64::max);
            // the circle integral is exact; its defect sits at roundoff
            let pass = slope >= n as f64 + 0.7 || worst <= 1e-13;
            ok &= pass;
            parts.push(if worst <= 1e-13 { format!("{name} N={n}: max defect {worst:.1e} at roundoff") } else { format!("{name} N={n}: {slope:.2} (>= {:.1})", n as f64 + 0.7) });
        }
    }
    Ok((ok, format!("defect slopes: {}", parts.join("; "))))
}

fn c5_circle() -> Outcome {
    let c = circle();
    let chart = chart_of(&c, 3);
    let ser = &chart.series;
    let spread = ser
        .h
        .iter()
        .map(|hk| {
            let mean = hk.iter().sum::<f64>() / hk.len() as f64;
            hk.iter().map(|v| (v / mean - 1.0).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let map = BilliardChartMap { chart: &chart, curve: &c };
    let (tau0, _) = chart.forward(chart.s0, 1e-3).map_err(e)?;
    let g = glue_on_sector(&map, 0.3, 0.05, 0.1, tau0).map_err(e)?;
    let fields = [FoliationField::Base, FoliationField::Extended { gluing: g, map: &map, max_steps: 10_000 }];
    let mut leaf_spread: f64 = 0.0;
    for f in &fields {
        for level in [1e-3, 4e-3] {
            let ys: Vec<f64> = linspace(chart.s0 - 0.3, chart.s0 + 0.3, 9).iter().map(|&s| leaf_y(&chart, f, s, level)).collect::<Result<_>>().map_err(e)?;
            leaf_spread = leaf_spread.max(ys.iter().map(|y| (y - ys[0]).abs()).fold(0.0, f64::max));
        }
    }
    Ok((
        spread < 1e-6 && leaf_spread < 1e-8,
        format!("max rel. spread of h_k in s = {spread:.2e} (< 1e-6), leaf y-spread = {leaf_spread:.2e} (< 1e-8)"),
    ))
}

struct Ladder {
    confocal: f64,
    tangency: f64,
    leaves: usize,
}

fn ellipse_ladders(fields: &[FoliationField<'_>], chart: &NormalChart, c: &ConvexCurve) -> Result<Ladder> {
    let l = c.length();
    let thetas = linspace(chart.s0 - 0.45 * l, chart.s0 + 0.45 * l, 800);
    let probes = linspace(chart.s0 - 0.3 * l, chart.s0 + 0.3 * l, 12);
    let mut out = Ladder { confocal: 0.0, tangency: 0.0, leaves: 0 };
    for f in fields {
        for level in [1e-2, 1e-3, 1e-4] {
            let cst = leaf_caustic(c, chart, f, level, &thetas, 1e-3)?;
            let lam: Vec<f64> = cst.points.iter().map(|p| ellipse_point_lambda(2.0, 1.0, [p.x, p.y]).unwrap_or(f64::NAN)).collect();
            let mean = lam.iter().sum::<f64>() / lam.len() as f64;
            let res = lam.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
            out.confocal = out.confocal.max(if res.is_nan() { INF } else { res });
            out.tangency = out.tangency.max(tangency_validate(c, &cst, &probes)?.max_defect());
            out.leaves += 1;
        }
    }
    Ok(out)
}

fn c6_confocal() -> Outcome {
    let c = ellipse();
    let chart = chart_of(&c, 3);
    let lad = ellipse_ladders(&[FoliationField::Base], &chart, &c).map_err(e)?;
    let b = Billiard::new(&c);
    let o = b.orbit(0.7, 1e-2, 1000, false).map_err(e)?;
    let lam: Vec<f64> = o
        .rows
        .windows(2)
        .map(|w| ellipse_lambda(2.0, 1.0, [w[0].x, w[0].y_coord], [w[1].x - w[0].x, w[1].y_coord - w[0].y_coord]))
        .collect();
    let spread = lam.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - lam.iter().cloned().fold(INF, f64::min);
    Ok((
        lad.confocal < 1e-4 && spread < 1e-8,
        format!("per-leaf confocal residual = {:.2e} (< 1e-4) over {} leaves, orbit lambda spread = {spread:.2e} (< 1e-8) over 1000 steps", lad.confocal, lad.leaves),
    ))
}

fn c7_tangency() -> Outcome {
    let c = ellipse();
    let chart = chart_of(&c, 3);
    let psi = FlatPerturbation::new(1e-2, 10.0).map_err(e)?;
    let fields = [FoliationField::Base, FoliationField::Perturbed { psi, eps: 1.0 }];
    let lad = ellipse_ladders(&fields, &chart, &c).map_err(e)?;
    let circ = circle();
    let cch = chart_of(&circ, 3);
    let cl = cch.series.h_value(0.0, 1e-2);
    let cst = leaf_caustic(&circ, &cch, &FoliationField::Base, cl, &linspace(cch.s0 - 2.5, cch.s0 + 2.5, 400), 1e-3).map_err(e)?;
    let ct = tangency_validate(&circ, &cst, &linspace(cch.s0 - 1.5, cch.s0 + 1.5, 12)).map_err(e)?.max_defect();
    let worst = lad.tangency.max(ct);
    Ok((worst < 1e-6, format!("max tangent-pair asymmetry = {worst:.2e} rad (< 1e-6) over {} caustics, 12 footpoints each", lad.leaves + 1)))
}

fn c8_distinct() -> Outcome {
    let c = ellipse();
    let chart = chart_of(&c, 3);
    let psi = FlatPerturbation::new(1e-2, 10.0).map_err(e)?;
    let w = Window { tau: (-2.0, 2.0), h: (1e-4, 1e-2) };
    let fam = perturbed_family(&chart, psi, &[0.0, 0.5, 1.0], &w).map_err(e)?;
    let lad = ellipse_ladders(&fam, &chart, &c).map_err(e)?;
    let h = 1e-2;
    let mut min_sep = INF;
    for centre in [-1.5, -0.5, 0.5, 1.5] {
        for i in 0..fam.len() {
            for j in i + 1..fam.len() {
                let best = linspace(centre, centre + 0.25, 16)
                    .into_iter()
                    .map(|t| Ok((fam[i].value(t, h)? - fam[j].value(t, h)?).abs()))
                    .collect::<Result<Vec<f64>>>()
                    .map_err(e)?
                    .into_iter()
                    .fold(0.0, f64::max);
                min_sep = min_sep.min(best);
            }
        }
    }
    Ok((
        fam.len() >= 3 && lad.confocal < 1e-4 && lad.tangency < 1e-6 && min_sep > 0.0,
        format!(
            "{} foliations; confocal {:.2e} (< 1e-4), tangency {:.2e} (< 1e-6); min pairwise separation {min_sep:.2e} (> 0) over 4 windows",
            fam.len(),
            lad.confocal,
            lad.tangency
        ),
    ))
}

fn c9_orbits() -> Outcome {
    let c = cubic_arc();
    let b = Billiard::new(&c);
    let (lo, hi) = c.s_domain();
    let s0 = lo + 0.01 * (hi - lo);
    let mut scaled = vec![];
    for y0 in [1e-2, 1e-3, 1e-4] {
        let o = b.orbit(s0, y0, 1_000_000, false).map_err(e)?;
        if !o.escaped {
            return Ok((false, format!("orbit from y0 = {y0} did not escape")));
        }
        scaled.push(o.steps() as f64 * y0.sqrt());
    }
    let (cmin, cmax) = (scaled.iter().cloned().fold(INF, f64::min), scaled.iter().cloned().fold(0.0, f64::max));
    let mut spread_ratio: f64 = 0.0;
    for (curve, y0) in [(ellipse(), 1e-3), (ellipse(), 1e-4), (cubic_arc(), 1e-4)] {
        let b = Billiard::new(&curve);
        let start = if curve.is_closed() { 0.3 } else { s0 };
        let o = b.orbit(start, y0, 200, false).map_err(e)?;
        let inc: Vec<f64> = o.rows.windows(2).map(|w| lazutkin_parameter(&curve, w[0].s, w[1].s)).collect::<Result<_>>().map_err(e)?;
        let mean = inc.iter().sum::<f64>() / inc.len() as f64;
        let spread = (inc.iter().cloned().fold(0.0, f64::max) - inc.iter().cloned().fold(INF, f64::min)) / mean;
        spread_ratio = spread_ratio.max(spread / (5.0 * y0.sqrt()));
    }
    Ok((
        cmax <= 5.0 * cmin && spread_ratio <= 1.0,
        format!(
            "N(y0) sqrt(y0) = [{}] within [c, 5c] with c = {cmin:.3}; worst increment spread / (5 sqrt y) = {spread_ratio:.2e} (<= 1)",
            scaled.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn c10_catalog() -> Outcome {
    let specs = [
        ("circle1", CurveSpec::circle(1.0), true),
        ("circle8", CurveSpec::circle(8.0), true),
        ("ellipse_arc", CurveSpec::ellipse(2.0, 1.0).with_window(0.2, 2.0), true),
        ("parabola", CurveSpec::graph(GraphFn::Power { r: 2.0 }, -INF, INF), false),
        ("cubic", CurveSpec::graph(GraphFn::Power { r: 3.0 }, 1.0, INF), true),
        ("hyperbola", CurveSpec::graph(GraphFn::Hyperbola { a: 1.0 }, -INF, INF), true),
    ];
    let curves: Vec<ConvexCurve> = specs.iter().map(|s| build_curve(&s.1)).collect::<Result<_>>().map_err(e)?;
    let mut mismatches = vec![];
    for (i, a) in specs.iter().enumerate() {
        for (j, b) in specs.iter().enumerate() {
            let v = classify_curves(&curves[i], &curves[j]).map_err(e)?;
            let smooth = a.2 == b.2;
            let cond = match (a.2, b.2) {
                (true, true) => Condition::I,
                (false, false) => Condition::II,
                _ => Condition::Neither,
            };
            let sympl = smooth && (i == j || !a.2);
            if v.smooth_conjugate != smooth || v.condition != cond || v.symplectic_conjugate != sympl {
                mismatches.push(format!("{} vs {}", a.0, b.0));
            }
        }
    }
    let parabola = lazutkin_length(&curves[3], Direction::Forward).map_err(e)?.verdict;
    let cubic = lazutkin_length(&curves[4], Direction::Forward).map_err(e)?.verdict;
    let pair = classify_curves(&curves[0], &curves[1]).map_err(e)?;
    let ok = mismatches.is_empty()
        && parabola == Convergence::Divergent
        && cubic.is_finite()
        && pair.smooth_conjugate
        && !pair.symplectic_conjugate
        && (pair.alpha - 2.0).abs() < 1e-10;
    Ok((
        ok,
        format!(
            "36 pairs, {} mismatches; parabola {:?}, cubic {:?}, circle pair alpha = {:.12} (= 2)",
            mismatches.len(),
            parabola,
            cubic,
            pair.alpha
        ),
    ))
}

fn run_cli(dir: &Path, args: &[&str]) -> std::result::Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_billiards"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .map_err(e)?;
    match out.status.code() {
        Some(0) | Some(4) => Ok(()),
        c => Err(format!("`{}` exited with {c:?}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))),
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|f| {
            let f = f.unwrap();
            (f.file_name().to_string_lossy().into_owned(), std::fs::read(f.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn c11_determinism() -> Outcome {
    let runs: [&[&str]; 4] = [
        &["orbit", "--svg", "-D", "curve=ellipse:2,1", "-D", "y0=1e-3", "-D", "steps=500"],
        &["series", "--format", "json", "-D", "curve=ellipse:2,1"],
        &["foliate", "--svg", "--seed", "42", "-D", "curve=ellipse:2,1"],
        &["conjugacy", "--format", "json", "-D", "curve=circle:1", "-D", "curve2=circle:8"],
    ];
    let root = std::env::temp_dir().join(format!("billiards-acceptance-{}", std::process::id()));
    let mut identical = 0;
    let mut files = 0;
    for (k, args) in runs.iter().enumerate() {
        let (a, b) = (root.join(format!("{k}a")), root.join(format!("{k}b")));
        run_cli(&a, args)?;
        run_cli(&b, args)?;
        let (da, db) = (dir_bytes(&a), dir_bytes(&b));
        files += da.len();
        if da == db {
            identical += 1;
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    Ok((identical == runs.len(), format!("{identical}/{} commands byte-identical across two runs ({files} files)", runs.len())))
}

fn main() {
    let criteria: [(&str, f64, fn() -> Outcome); 11] = [
        ("symplecticity", 10.0, c1_symplectic),
        ("twist asymptotics", 10.0, c2_twist),
        ("area-preservation constraint on q", 30.0, c3_q_constraint),
        ("series flatness", 120.0, c4_flatness),
        ("circle exactness", 30.0, c5_circle),
        ("confocal caustics", 60.0, c6_confocal),
        ("tangency symmetry", 60.0, c7_tangency),
        ("distinct foliations", 120.0, c8_distinct),
        ("orbit structure", 30.0, c9_orbits),
        ("conjugacy catalog", 60.0, c10_catalog),
        ("determinism", 60.0, c11_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = vec![];
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let r = f();
        let dt = t.elapsed().as_secs_f64();
        let (ok, detail) = match r {
            Ok((ok, d)) => (ok && dt < *budget, d),
            Err(msg) => (false, format!("error: {msg}")),
        };
        println!("{} {:>2} {name}: {detail}; {dt:.2} s (< {budget} s)", if ok { "PASS" } else { "FAIL" }, i + 1);
        if !ok {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
