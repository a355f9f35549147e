//! Flat key-value configuration.
//!
//! ```text
//! # global keys
//! curve = ellipse:2,1
//!
//! [orbit]
//! y0 = 0.02
//! steps = 100
//! ```
//!
//! Keys inside `[name]` are stored as `name.key`. A command looks up
//! `command.key` first and falls back to the bare `key`.

use std::collections::BTreeMap;

use convex_billiards::{CurveSpec, GraphFn};

use crate::CliError;

#[derive(Clone, Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("config line {}: expected `key = value`", i + 1)))?;
            let key = if section.is_empty() { k.trim().to_string() } else { format!("{section}.{}", k.trim()) };
            cfg.values.insert(key, v.trim().to_string());
        }
        Ok(cfg)
    }

    /// Apply a `key=value` override from the command line.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("override `{assignment}` is not KEY=VALUE")))?;
        self.values.insert(k.trim().to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn get(&self, cmd: &str, key: &str) -> Option<&str> {
        self.values.get(&format!("{cmd}.{key}")).or_else(|| self.values.get(key)).map(String::as_str)
    }

    pub fn f64(&self, cmd: &str, key: &str, default: f64) -> Result<f64, CliError> {
        match self.get(cmd, key) {
            None => Ok(default),
            Some(v) => parse_num(key, v),
        }
    }

    pub fn opt_f64(&self, cmd: &str, key: &str) -> Result<Option<f64>, CliError> {
        self.get(cmd, key).map(|v| parse_num(key, v)).transpose()
    }

    pub fn usize(&self, cmd: &str, key: &str, default: usize) -> Result<usize, CliError> {
        match self.get(cmd, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| CliError::Validation(format!("{key}: `{v}` is not a non-negative integer"))),
        }
    }

    pub fn bool(&self, cmd: &str, key: &str, default: bool) -> Result<bool, CliError> {
        match self.get(cmd, key) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(CliError::Validation(format!("{key}: `{v}` is not a boolean"))),
        }
    }

    pub fn list(&self, cmd: &str, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        match self.get(cmd, key) {
            None => Ok(default.to_vec()),
            Some(v) => v.split(',').map(|x| parse_num(key, x.trim())).collect(),
        }
    }

    pub fn pair(&self, cmd: &str, key: &str) -> Result<Option<(f64, f64)>, CliError> {
        match self.get(cmd, key) {
            None => Ok(None),
            Some(v) => {
                let xs: Vec<f64> = v.split(',').map(|x| parse_num(key, x.trim())).collect::<Result<_, _>>()?;
                match xs[..] {
                    [a, b] if a < b => Ok(Some((a, b))),
                    _ => Err(CliError::Validation(format!("{key}: expected `lo,hi` with lo < hi, got `{v}`"))),
                }
            }
        }
    }
}

fn parse_num(key: &str, v: &str) -> Result<f64, CliError> {
    v.parse::<f64>().map_err(|_| CliError::Validation(format!("{key}: `{v}` is not a number")))
}

/// Curve descriptors:
///
/// | form | curve |
/// |---|---|
/// | `circle:R` | circle of radius `R` |
/// | `ellipse:A,B` | ellipse with semi-axes `A`, `B` |
/// | `ellipse:A,B@U0,U1` | open arc `u in (U0, U1)` of the ellipse |
/// | `power:R@X0,X1` | graph of `x^R` over `[X0, X1]` (`inf` allowed) |
/// | `hyperbola:A@X0,X1` | graph of `sqrt(A^2 + x^2)`, default range the whole line |
/// | `sampled:PATH` | closed curve through the `x,y` rows of a text file |
pub fn parse_curve(desc: &str) -> Result<CurveSpec, CliError> {
    let bad = |why: &str| CliError::Validation(format!("curve `{desc}`: {why}"));
    let (kind, rest) = desc.split_once(':').ok_or_else(|| bad("expected KIND:PARAMS"))?;
    if kind == "sampled" {
        let text = std::fs::read_to_string(rest).map_err(|e| bad(&e.to_string()))?;
        let mut pts = vec![];
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let xy: Vec<f64> = line.split([',', ' ', '\t']).filter(|t| !t.is_empty()).map(|t| parse_num("sampled", t)).collect::<Result<_, _>>()?;
            if xy.len() != 2 {
                return Err(bad(&format!("row `{line}` is not an x,y pair")));
            }
            pts.push([xy[0], xy[1]]);
        }
        return Ok(CurveSpec::sampled(pts, true));
    }
    let (params, range) = match rest.split_once('@') {
        Some((p, r)) => (p, Some(r)),
        None => (rest, None),
    };
    let nums = |s: &str| -> Result<Vec<f64>, CliError> { s.split(',').map(|x| parse_num("curve", x.trim())).collect() };
    let p = nums(params)?;
    let r = range.map(nums).transpose()?;
    if let Some(r) = &r {
        if r.len() != 2 || r[0] >= r[1] {
            return Err(bad("range must be `lo,hi` with lo < hi"));
        }
    }
    let spec = match (kind, &p[..]) {
        ("circle", &[radius]) => CurveSpec::circle(radius),
        ("ellipse", &[a, b]) => CurveSpec::ellipse(a, b),
        ("power", &[e]) => {
            let r = r.as_ref().ok_or_else(|| bad("power graphs need an @X0,X1 range"))?;
            return Ok(CurveSpec::graph(GraphFn::Power { r: e }, r[0], r[1]));
        }
        ("hyperbola", &[a]) => {
            let (x0, x1) = r.as_ref().map_or((f64::NEG_INFINITY, f64::INFINITY), |r| (r[0], r[1]));
            return Ok(CurveSpec::graph(GraphFn::Hyperbola { a }, x0, x1));
        }
        _ => return Err(bad("unknown kind or wrong number of parameters")),
    };
    Ok(match r {
        Some(r) => spec.with_window(r[0], r[1]),
        None => spec,
    })
}
