use std::collections::BTreeMap;
use std::path::PathBuf;

use convex_billiards::billiard::{phi_of_y, y_of_phi, Billiard};
use convex_billiards::caustics::{assemble_caustic_foliation, leaf_caustic, tangency_validate, Caustic};
use convex_billiards::conjugacy::{boundary_conjugating_map, classify_curves, lazutkin_lengths, Condition};
use convex_billiards::foliation::{perturbed_family, FlatPerturbation, FoliationField, Window};
use convex_billiards::normal_form::{build_normal_chart, lazutkin_parameter, NormalChart};
use convex_billiards::numeric::{geomspace, linspace, loglog_slope};
use convex_billiards::series::{InvariantSeries, SeriesConfig};
use convex_billiards::{ConvexCurve, CurveKind, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{parse_curve, Config};
use crate::output::{pretty, write_file, Check, Format, Profile, Report, Svg, Table, REPORT_SCHEMA};
use crate::CliError;

type Res<T> = Result<T, CliError>;

pub struct Ctx {
    pub cmd: &'static str,
    pub cfg: Config,
    out: PathBuf,
    format: Format,
    svg: bool,
    rng: ChaCha8Rng,
    pub report: Report,
}

impl Ctx {
    pub fn new(cmd: &'static str, cfg: Config, out: PathBuf, format: Format, svg: bool, seed: u64, profile: Profile) -> Self {
        let report = Report {
            schema: REPORT_SCHEMA,
            command: cmd.into(),
            config: cfg.entries().clone(),
            seed,
            tolerance_profile: profile.name(),
            tolerances: profile.tolerances(),
            checks: vec![],
            verdicts: BTreeMap::new(),
            warnings: vec![],
            artifacts: vec![],
        };
        Ctx { cmd, cfg, out, format, svg, rng: ChaCha8Rng::seed_from_u64(seed), report }
    }

    fn tol(&self, key: &str) -> f64 {
        self.report.tolerances[key]
    }

    fn check(&mut self, c: Check) {
        self.report.checks.push(c);
    }

    fn warn(&mut self, w: impl Into<String>) {
        self.report.warnings.push(w.into());
    }

    fn emit(&mut self, t: &Table) -> Res<()> {
        let f = t.write(&self.out, self.format)?;
        self.report.artifacts.push(f);
        Ok(())
    }

    fn emit_svg(&mut self, svg: &Svg) -> Res<()> {
        if self.svg {
            let name = format!("{}.svg", self.cmd);
            write_file(&self.out, &name, &svg.render(800.0))?;
            self.report.artifacts.push(name);
        }
        Ok(())
    }

    fn curve(&self, key: &str) -> Res<ConvexCurve> {
        let desc = self.cfg.get(self.cmd, key).unwrap_or(if key == "curve" { "ellipse:2,1" } else { "" });
        if desc.is_empty() {
            return Err(CliError::Validation(format!("`{key}` is required for {}", self.cmd)));
        }
        Ok(ConvexCurve::new(parse_curve(desc)?)?)
    }

    pub fn finish(&mut self) -> Res<()> {
        self.report.artifacts.push("report.json".into());
        write_file(&self.out, "report.json", &pretty(&self.report)?)?;
        self.report.print_summary();
        Ok(())
    }
}

fn outline(c: &ConvexCurve, n: usize) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = c.table(n).iter().map(|r| [r[1], r[2]]).collect();
    if c.is_closed() {
        pts.push(pts[0]);
    }
    pts
}

/// Sub-arc carrying the series on an open curve: the given one, or the middle half.
fn sub_arc(ctx: &Ctx, c: &ConvexCurve) -> Res<Option<(f64, f64)>> {
    if c.is_closed() {
        return Ok(None);
    }
    let (lo, hi) = c.s_domain();
    Ok(Some(ctx.cfg.pair(ctx.cmd, "sub_arc")?.unwrap_or((lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo)))))
}

fn build_series(ctx: &Ctx, c: &ConvexCurve) -> Res<InvariantSeries> {
    let cfg = SeriesConfig {
        order: ctx.cfg.usize(ctx.cmd, "order", 3)?,
        grid_n: ctx.cfg.usize(ctx.cmd, "grid_n", 256)?,
        sub_arc: sub_arc(ctx, c)?,
        // chords from the sub-arc must stay on the arc while the drift profile is fitted
        profile_y_max: ctx.cfg.f64(ctx.cmd, "profile_y_max", if c.is_closed() { SeriesConfig::default().profile_y_max } else { 1e-4 })?,
        ..SeriesConfig::default()
    };
    Ok(InvariantSeries::build(c, &cfg)?)
}

pub fn curve(ctx: &mut Ctx) -> Res<bool> {
    let c = ctx.curve("curve")?;
    let n = ctx.cfg.usize(ctx.cmd, "samples", 400)?;
    if n < 2 {
        return Err(CliError::Validation("samples must be at least 2".into()));
    }
    let mut t = Table::new("curve", &["s", "x", "y", "kappa", "t_lazutkin"]);
    let rows = c.table(n);
    let mut tl = 0.0;
    for (i, r) in rows.iter().enumerate() {
        if i > 0 {
            tl += lazutkin_parameter(&c, rows[i - 1][0], r[0])?;
        }
        t.push(vec![r[0], r[1], r[2], r[3], tl]);
    }
    ctx.emit(&t)?;
    ctx.report.verdict("length", c.length());
    ctx.report.verdict("closed", c.is_closed());
    ctx.report.verdict("ends", c.ends());
    match lazutkin_lengths(&c) {
        Ok(l) => {
            ctx.report.verdict("lazutkin_length", l.total());
            ctx.report.verdict("lazutkin_ends", l);
        }
        Err(e) => ctx.warn(format!("Lazutkin length not decided: {e}")),
    }
    let mut svg = Svg::default();
    svg.layer("curve", "black", 1.5, vec![outline(&c, 600)]);
    ctx.emit_svg(&svg)?;
    Ok(false)
}

pub fn orbit(ctx: &mut Ctx) -> Res<bool> {
    let cmd = ctx.cmd;
    let c = ctx.curve("curve")?;
    let b = Billiard::new(&c);
    let (lo, hi) = c.s_domain();
    let s0 = ctx.cfg.f64(cmd, "s0", if c.is_closed() { 0.0 } else { lo + 0.01 * (hi - lo) })?;
    let y0 = match (ctx.cfg.opt_f64(cmd, "phi0")?, ctx.cfg.opt_f64(cmd, "y0")?) {
        (Some(_), Some(_)) => return Err(CliError::Validation("give either phi0 or y0, not both".into())),
        (Some(phi), None) => {
            if !(phi > 0.0 && phi < std::f64::consts::PI) {
                return Err(CliError::Validation(format!("phi0 = {phi} must lie in (0, pi)")));
            }
            y_of_phi(phi)
        }
        (None, Some(y)) => {
            if !(y > 0.0 && y < 2.0) {
                return Err(CliError::Validation(format!("y0 = {y} must lie in (0, 2)")));
            }
            y
        }
        (None, None) => 0.02,
    };
    let steps = ctx.cfg.usize(cmd, "steps", 1000)?;
    if steps == 0 || steps > 10_000_000 {
        return Err(CliError::Validation(format!("steps = {steps} must lie in [1, 1e7]")));
    }
    let backward = ctx.cfg.bool(cmd, "backward", false)?;
    let o = b.orbit(s0, y0, steps, backward)?;

    let mut t = Table::new("orbit", &["j", "s", "phi", "y", "x", "y_coord"]);
    for r in &o.rows {
        t.push(vec![r.j as f64, r.s, r.phi, r.y, r.x, r.y_coord]);
    }
    ctx.emit(&t)?;
    let (ymin, ymax) = o.rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.y), b.max(r.y)));
    ctx.report.verdict("steps", o.steps());
    ctx.report.verdict("escaped", o.escaped);
    ctx.report.verdict("y_range", [ymin, ymax]);
    if o.escaped {
        ctx.report.verdict("steps_times_sqrt_y0", o.steps() as f64 * y0.sqrt());
    }
    // increments of the Lazutkin parameter along the orbit; near the
    // boundary they are nearly equal
    if o.rows.len() >= 3 && o.rows.len() <= 20_001 {
        let inc: Vec<f64> = o.rows.windows(2).map(|w| lazutkin_parameter(&c, w[0].s, w[1].s)).collect::<Result<_, _>>()?;
        let mean = inc.iter().sum::<f64>() / inc.len() as f64;
        let (a, z) = inc.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, z), &v| (a.min(v), z.max(v)));
        ctx.check(Check::at_most("lazutkin_increment_relative_spread", (z - a) / mean.abs(), 5.0 * y0.sqrt()));
    }
    let mut svg = Svg::default();
    svg.layer("curve", "black", 1.5, vec![outline(&c, 600)]);
    svg.layer("chords", "steelblue", 0.5, vec![o.rows.iter().take(2000).map(|r| [r.x, r.y_coord]).collect()]);
    ctx.emit_svg(&svg)?;
    Ok(false)
}

pub fn series(ctx: &mut Ctx) -> Res<bool> {
    let cmd = ctx.cmd;
    let c = ctx.curve("curve")?;
    let ser = build_series(ctx, &c)?;
    let n = ser.order;
    let mut cols = vec!["s".to_string(), "w".to_string()];
    cols.extend((1..=n).map(|k| format!("h_{k}")));
    let mut t = Table { name: "series".into(), columns: cols, rows: vec![] };
    for i in 0..ser.s.len() {
        let mut row = vec![ser.s[i], ser.w[i]];
        row.extend((0..n).map(|k| ser.h[k][i]));
        t.push(row);
    }
    ctx.emit(&t)?;

    let ys = ctx.cfg.list(cmd, "defect_ys", &geomspace(1e-4, 1e-2, 5))?;
    let n_s = ctx.cfg.usize(cmd, "defect_samples", 32)?;
    let (slope, defects) = ser.defect_slope(&c, &ys, n_s)?;
    let mut d = Table::new("defects", &["y", "defect"]);
    for (y, e) in ys.iter().zip(&defects) {
        d.push(vec![*y, *e]);
    }
    ctx.emit(&d)?;
    // points at roundoff carry no slope information
    let floor = ctx.tol("defect_roundoff_floor");
    let (fy, fd): (Vec<f64>, Vec<f64>) = ys.iter().zip(&defects).filter(|(_, d)| **d > floor).unzip();
    let threshold = n as f64 + ctx.tol("defect_slope_margin");
    if fy.len() >= 2 {
        let fitted = if fy.len() == ys.len() { slope } else { loglog_slope(&fy, &fd) };
        if fy.len() < ys.len() {
            ctx.warn(format!("{} defect(s) at roundoff left out of the slope fit", ys.len() - fy.len()));
        }
        ctx.check(Check::at_least("defect_slope", fitted, threshold));
    } else {
        let worst = defects.iter().cloned().fold(0.0, f64::max);
        ctx.warn(format!("defects at roundoff (max {worst:.2e}); slope not informative"));
        ctx.check(Check::at_most("defect_max_at_roundoff", worst, floor));
    }
    let spread: Vec<f64> = ser
        .h
        .iter()
        .map(|hk| {
            let mean = hk.iter().sum::<f64>() / hk.len() as f64;
            hk.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max) / mean.abs()
        })
        .collect();
    ctx.report.verdict("order", n);
    ctx.report.verdict("h_relative_spread", spread);
    ctx.report.verdict("constants", &ser.constants);
    ctx.report.verdict("diagnostics", &ser.diagnostics);
    let mut svg = Svg::default();
    svg.layer("curve", "black", 1.5, vec![outline(&c, 600)]);
    ctx.emit_svg(&svg)?;
    Ok(false)
}

/// Confocal parameter of a point inside the ellipse `x^2/a^2 + y^2/b^2 = 1`.
fn confocal_lambda(a: f64, b: f64, x: f64, y: f64) -> Option<f64> {
    let bb = a * a + b * b - x * x - y * y;
    let cc = a * a * b * b - x * x * b * b - y * y * a * a;
    let disc = bb * bb - 4.0 * cc;
    (disc >= 0.0).then(|| 0.5 * (bb - disc.sqrt()))
}

fn max_dev(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max)
}

struct Ladder<'a> {
    curve: &'a ConvexCurve,
    chart: &'a NormalChart,
    thetas: Vec<f64>,
    probes: Vec<f64>,
}

impl Ladder<'_> {
    fn run(&self, ctx: &mut Ctx, tag: &str, field: &FoliationField<'_>, levels: &[f64], table: &mut Table, id: f64) -> Res<Vec<Caustic>> {
        let mut out = vec![];
        for &level in levels {
            let cst = leaf_caustic(self.curve, self.chart, field, level, &self.thetas, 1e-3)?;
            let name = format!("{tag}[level={level:e}]");
            ctx.check(Check::at_most(format!("envelope_on_line{name}"), cst.on_line_residual, ctx.tol("envelope_on_line")));
            let rep = tangency_validate(self.curve, &cst, &self.probes)?;
            ctx.check(Check::at_most(format!("tangency_symmetry{name}"), rep.max_defect(), ctx.tol("tangency_symmetry_rad")));
            match self.curve.spec().kind {
                CurveKind::Ellipse { a, b } if self.curve.spec().window.is_none() => {
                    let lam: Vec<f64> = cst.points.iter().map(|p| confocal_lambda(a, b, p.x, p.y).unwrap_or(f64::NAN)).collect();
                    let res = max_dev(&lam);
                    ctx.check(Check::at_most(format!("confocal_residual{name}"), if res.is_nan() { f64::INFINITY } else { res }, ctx.tol("confocal_residual")));
                }
                // perturbed circle leaves are invariant but no longer concentric
                CurveKind::Circle { .. } if self.curve.spec().window.is_none() && id == 0.0 => {
                    let r: Vec<f64> = cst.points.iter().map(|p| p.norm()).collect();
                    ctx.check(Check::at_most(format!("circle_radius_spread{name}"), max_dev(&r), ctx.tol("circle_radius")));
                }
                _ => {}
            }
            for (th, p) in cst.theta.iter().zip(&cst.points) {
                table.push(vec![id, level, *th, p.x, p.y]);
            }
            out.push(cst);
        }
        Ok(out)
    }
}

/// Caustic ladders for the base foliation, and with `perturbed` for the
/// whole weight family `h + eps psi`.
pub fn ladder(ctx: &mut Ctx, perturbed: bool) -> Res<bool> {
    let cmd = ctx.cmd;
    let c = ctx.curve("curve")?;
    let ser = build_series(ctx, &c)?;
    let chart = build_normal_chart(&ser, ctx.cfg.opt_f64(cmd, "s0")?, ctx.cfg.opt_f64(cmd, "y_max")?)?;
    let mut levels = ctx.cfg.list(cmd, "levels", &[1e-2, 1e-3, 1e-4])?;
    if levels.iter().any(|&l| !(l > 0.0)) {
        return Err(CliError::Validation("levels must be positive".into()));
    }
    levels.sort_by(|a, b| b.total_cmp(a));
    let n_theta = ctx.cfg.usize(cmd, "n_theta", 800)?;
    let frac = ctx.cfg.f64(cmd, "frac", if c.is_closed() { 0.9 } else { 0.5 })?;
    let n_probes = ctx.cfg.usize(cmd, "probes", 12)?;
    if n_theta < 16 || n_probes == 0 || !(frac > 0.0 && frac < 1.0) {
        return Err(CliError::Validation("need n_theta >= 16, probes >= 1 and frac in (0, 1)".into()));
    }
    let (lo, hi) = ser.grid.span();
    let width = frac * (hi - lo);
    let (f0, f1) = (chart.s0 - 0.5 * width, chart.s0 + 0.5 * width);
    let thetas = linspace(f0, f1, n_theta);
    let mut probes: Vec<f64> = (0..n_probes).map(|_| chart.s0 + 0.3 * width * (2.0 * ctx.rng.random::<f64>() - 1.0)).collect();
    probes.sort_by(f64::total_cmp);
    let lad = Ladder { curve: &c, chart: &chart, thetas, probes: probes.clone() };
    let mut table = Table::new(cmd, &["field", "level", "theta", "x", "y"]);

    let mut fields: Vec<(String, f64, FoliationField<'static>)> = vec![];
    let mut window = None;
    if perturbed {
        let eps = ctx.cfg.list(cmd, "eps", &[0.0, 0.5, 1.0])?;
        let psi = FlatPerturbation::new(ctx.cfg.f64(cmd, "a", 1e-2)?, ctx.cfg.f64(cmd, "c", 10.0)?)?;
        let lmin = *levels.last().unwrap();
        let tau = |s: f64| chart.forward(s, ser.y_on_level(s, lmin)).map(|p| p.0);
        let mut w = Window { tau: (tau(f0)?, tau(f1)?), h: (0.5 * lmin, 1.5 * levels[0]) };
        let fam = match perturbed_family(&chart, psi, &eps, &w) {
            Err(Error::OutsideValidity(msg)) => {
                let cap = 0.95 * ser.h_value(chart.s0, chart.y_max);
                ctx.warn(format!("window shrunk to h <= {cap:.3e}: {msg}"));
                w.h.1 = cap;
                let before = levels.len();
                levels.retain(|&l| l <= cap);
                if levels.is_empty() {
                    return Err(CliError::Validation("no level fits inside the chart window".into()));
                }
                if levels.len() < before {
                    ctx.warn(format!("dropped {} level(s) above the shrunk window", before - levels.len()));
                }
                perturbed_family(&chart, psi, &eps, &w)?
            }
            r => r?,
        };
        ctx.report.verdict("perturbation", serde_json::json!({ "a": psi.a, "c": psi.c, "visible_from_h": psi.visible_from() }));
        for (e, f) in eps.iter().zip(fam) {
            fields.push((format!("[eps={e}]"), *e, f));
        }
        window = Some((w, psi));
    } else {
        fields.push((String::new(), 0.0, FoliationField::Base));
    }

    let step = |t: f64, h: f64| chart.step(&c, t, h);
    let mut svg = Svg::default();
    svg.layer("curve", "black", 1.5, vec![outline(&c, 600)]);
    let colours = ["crimson", "seagreen", "royalblue", "darkorange", "purple"];
    let mut nested = vec![];
    for (i, (tag, eps, f)) in fields.iter().enumerate() {
        if let Some((w, _)) = &window {
            let cert = f.certify(&step, w, 3, 4)?;
            ctx.check(Check::at_most(format!("certificate_defect{tag}"), cert.max_defect(), ctx.tol("certificate_defect")));
            ctx.report.verdict(&format!("certificate{tag}"), &cert);
        }
        let leaves = lad.run(ctx, tag, f, &levels, &mut table, if perturbed { *eps } else { i as f64 })?;
        svg.layer(
            &format!("leaves{i}"),
            colours[i % colours.len()],
            0.8,
            leaves.iter().map(|l| l.points.iter().map(|p| [p.x, p.y]).collect()).collect(),
        );
        nested.push(match assemble_caustic_foliation(&c, leaves, &probes) {
            Ok(fol) => serde_json::json!({ "field": tag, "nested": true, "depth": fol.depth }),
            Err(e) => {
                ctx.check(Check::at_least(format!("leaves_nested{tag}"), 0.0, 1.0));
                serde_json::json!({ "field": tag, "nested": false, "error": e.to_string() })
            }
        });
    }
    ctx.report.verdict("levels", &levels);
    ctx.report.verdict("foliations", nested);
    ctx.report.verdict("probe_footpoints", &probes);

    if let Some((w, psi)) = window.filter(|_| fields.len() > 1) {
        // pairwise separation at seeded probe points where psi is visible
        let h_lo = w.h.0.max(psi.visible_from());
        let pts: Vec<(f64, f64)> = (0..64)
            .map(|_| {
                let t = w.tau.0 + (w.tau.1 - w.tau.0) * ctx.rng.random::<f64>();
                let h = h_lo + (w.h.1 - h_lo) * ctx.rng.random::<f64>();
                (t, h)
            })
            .collect();
        let mut worst = f64::INFINITY;
        for i in 0..fields.len() {
            for j in i + 1..fields.len() {
                let mut best: f64 = 0.0;
                for &(t, h) in &pts {
                    best = best.max((fields[i].2.value(t, h)? - fields[j].2.value(t, h)?).abs());
                }
                worst = worst.min(best);
            }
        }
        ctx.check(Check::above("distinct_min_pairwise_difference", worst, 0.0));
    }

    // sample chords on the lowest level of the first field
    let mut chords = vec![];
    let b = Billiard::new(&c);
    let base = &fields[0].2;
    for &s in &probes {
        let y = convex_billiards::caustics::leaf_y(&chart, base, s, *levels.last().unwrap())?;
        if let Ok((s2, _)) = b.step_sphi(s, phi_of_y(y)) {
            let (p, q) = (c.position(s)?, c.position(if c.is_closed() { s2.rem_euclid(c.length()) } else { s2 })?);
            chords.push(vec![[p.x, p.y], [q.x, q.y]]);
        }
    }
    svg.layer("chords", "gray", 0.5, chords);
    ctx.emit(&table)?;
    ctx.emit_svg(&svg)?;
    Ok(false)
}

pub fn conjugacy(ctx: &mut Ctx) -> Res<bool> {
    let c1 = ctx.curve("curve")?;
    let c2 = ctx.curve("curve2")?;
    let v = classify_curves(&c1, &c2)?;
    let rule = match v.condition {
        Condition::I => "both Lazutkin lengths finite: boundary maps conjugate; symplectic iff the lengths agree",
        Condition::II => "both Lazutkin lengths infinite on matching ends: conjugate, and symplectically so",
        Condition::Neither => "Lazutkin lengths differ in finiteness: not conjugate",
    };
    ctx.report.verdict("smooth_conjugate", v.smooth_conjugate);
    ctx.report.verdict("symplectic_conjugate", v.symplectic_conjugate);
    ctx.report.verdict("condition", v.condition);
    ctx.report.verdict("rule", rule);
    ctx.report.verdict("alpha", v.alpha);
    ctx.report.verdict("beta", v.beta);
    ctx.report.verdict("lazutkin_lengths", v.lengths);
    ctx.report.verdict("lazutkin_ends", [lazutkin_lengths(&c1)?, lazutkin_lengths(&c2)?]);
    if !v.smooth_conjugate {
        return Ok(true);
    }
    let m = boundary_conjugating_map(&c1, &c2, &v)?;
    let n = ctx.cfg.usize(ctx.cmd, "samples", 200)?;
    let (lo, hi) = c1.s_domain();
    let mut t = Table::new("conjugacy", &["s", "h_of_s"]);
    let mut skipped = 0;
    for s in linspace(lo, hi, n.max(2)) {
        match m.eval(s) {
            Ok(h) => t.push(vec![s, h]),
            Err(_) => skipped += 1,
        }
    }
    if skipped > 0 {
        ctx.warn(format!("{skipped} sample(s) of the boundary map fell outside the second curve's tabulated range"));
    }
    ctx.emit(&t)?;
    Ok(false)
}
