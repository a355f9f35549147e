use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

pub const REPORT_SCHEMA: &str = "billiards-report/1";
pub const TABLE_SCHEMA: &str = "billiards-table/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    Default,
    Strict,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Default => "default",
            Profile::Strict => "strict",
        }
    }

    pub fn tolerances(self) -> BTreeMap<String, f64> {
        let strict = self == Profile::Strict;
        let t = [
            ("tangency_symmetry_rad", if strict { 1e-8 } else { 1e-6 }),
            ("envelope_on_line", if strict { 1e-8 } else { 1e-6 }),
            ("confocal_residual", if strict { 1e-6 } else { 1e-4 }),
            ("circle_radius", if strict { 1e-10 } else { 1e-8 }),
            ("defect_slope_margin", if strict { 0.9 } else { 0.7 }),
            ("defect_roundoff_floor", 1e-13),
            ("certificate_defect", if strict { 1e-8 } else { 1e-6 }),
            ("length_equality", convex_billiards::conjugacy::LENGTH_EQUALITY_TOL),
        ];
        t.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub relation: &'static str,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Check { name: name.into(), measured, relation: "<=", threshold, pass: measured <= threshold }
    }
    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Check { name: name.into(), measured, relation: ">=", threshold, pass: measured >= threshold }
    }
    pub fn above(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Check { name: name.into(), measured, relation: ">", threshold, pass: measured > threshold }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub tolerance_profile: &'static str,
    pub tolerances: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub verdicts: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn verdict(&mut self, key: &str, v: impl Serialize) {
        self.verdicts.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Human-readable table on stdout; a closed pipe is not an error.
    pub fn print_summary(&self) {
        let mut out = std::io::stdout().lock();
        let _ = self.write_summary(&mut out);
    }

    fn write_summary(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "{}: {} checks, {} artifacts", self.command, self.checks.len(), self.artifacts.len())?;
        for c in &self.checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            writeln!(out, "  {tag} {:<40} {:>12.4e} {} {:.4e}", c.name, c.measured, c.relation, c.threshold)?;
        }
        for (k, v) in &self.verdicts {
            let s = v.to_string();
            if s.len() <= 100 {
                writeln!(out, "  {k:<46} {s}")?;
            }
        }
        for w in &self.warnings {
            writeln!(out, "  warning: {w}")?;
        }
        Ok(())
    }
}

/// Numeric table written as CSV or as versioned JSON.
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path, format: Format) -> Result<String, CliError> {
        let (file, body) = match format {
            Format::Csv => {
                let mut s = self.columns.join(",");
                s.push('\n');
                for r in &self.rows {
                    let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
                (format!("{}.csv", self.name), s)
            }
            Format::Json => {
                let rows: Vec<Vec<Value>> = self.rows.iter().map(|r| r.iter().map(|&v| num(v)).collect()).collect();
                let v = serde_json::json!({
                    "schema": TABLE_SCHEMA,
                    "name": self.name,
                    "columns": self.columns,
                    "rows": rows,
                });
                (format!("{}.json", self.name), pretty(&v)?)
            }
        };
        write_file(dir, &file, &body)?;
        Ok(file)
    }
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

pub fn pretty(v: &impl Serialize) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Static layered plot: each layer is an SVG group of polylines.
#[derive(Default)]
pub struct Svg {
    layers: Vec<(String, String, f64, Vec<Vec<[f64; 2]>>)>,
}

impl Svg {
    pub fn layer(&mut self, id: &str, stroke: &str, width: f64, lines: Vec<Vec<[f64; 2]>>) {
        self.layers.push((id.into(), stroke.into(), width, lines));
    }

    pub fn render(&self, size: f64) -> String {
        let pts = self.layers.iter().flat_map(|l| l.3.iter().flatten()).filter(|p| p[0].is_finite() && p[1].is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in pts {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
        }
        let span = (x1 - x0).max(y1 - y0).max(1e-12);
        let scale = 0.9 * size / span;
        let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let map = |p: &[f64; 2]| (0.5 * size + (p[0] - cx) * scale, 0.5 * size - (p[1] - cy) * scale);
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#);
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        for (id, stroke, width, lines) in &self.layers {
            let _ = writeln!(s, r#"<g id="{id}" fill="none" stroke="{stroke}" stroke-width="{width}">"#);
            for l in lines {
                let mut d = String::new();
                for p in l.iter().filter(|p| p[0].is_finite() && p[1].is_finite()) {
                    let (x, y) = map(p);
                    let _ = write!(d, "{x:.2},{y:.2} ");
                }
                let _ = writeln!(s, r#"<polyline points="{}"/>"#, d.trim_end());
            }
            let _ = writeln!(s, "</g>");
        }
        s.push_str("</svg>\n");
        s
    }
}
