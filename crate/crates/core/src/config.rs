//! Line-oriented `section.key = value` configuration.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileConfig {
    /// Mean radius `a` of `Ψ(s) = a + A cos(2πs/l)`.
    pub a: f64,
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub l: f64,
    /// Two-column `s Ψ` table replacing the cosine profile.
    pub spline_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternConfig {
    pub beta: f64,
    pub p: u32,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_steps: usize,
    /// Neck amplitudes `A` tried by the family scan.
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    #[serde(rename = "Ns")]
    pub ns: usize,
    #[serde(rename = "Ntheta")]
    pub ntheta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationConfig {
    pub kappa_target: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GlueCount {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlueConfig {
    pub n: GlueCount,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsConfig {
    /// Perturbation size relative to `‖U‖_∞`.
    pub delta: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    /// `None` selects the step from `f'`.
    pub dt: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalConfig {
    pub tol_rel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Obj,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Obj => "obj",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "json" => Some(Format::Json),
            "csv" => Some(Format::Csv),
            "obj" => Some(Format::Obj),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub profile: ProfileConfig,
    pub pattern: PatternConfig,
    pub grid: GridConfig,
    pub continuation: ContinuationConfig,
    pub glue: GlueConfig,
    pub dynamics: DynamicsConfig,
    pub critical: CriticalConfig,
    pub output: OutputConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            profile: ProfileConfig { a: 1.0, amplitude: 0.5, l: 1.0, spline_file: None },
            pattern: PatternConfig { beta: 1.0, p: 2, beta_min: 0.5, beta_max: 2.0, beta_steps: 4, amplitudes: vec![0.5, 0.4, 0.6, 0.3] },
            grid: GridConfig { ns: 128, ntheta: 64 },
            continuation: ContinuationConfig { kappa_target: 0.6, steps: 16 },
            glue: GlueConfig { n: GlueCount::Auto },
            dynamics: DynamicsConfig { delta: 1e-2, t_end: 50.0, dt: None, trials: 4, seed: 1, parallel: false },
            critical: CriticalConfig { tol_rel: 1e-4 },
            output: OutputConfig { directory: "out".into(), formats: vec![Format::Json, Format::Csv, Format::Obj] },
        }
    }
}

const KEYS: &[&str] = &[
    "profile.a",
    "profile.A",
    "profile.l",
    "profile.spline_file",
    "pattern.beta",
    "pattern.p",
    "pattern.beta_min",
    "pattern.beta_max",
    "pattern.beta_steps",
    "pattern.amplitudes",
    "grid.Ns",
    "grid.Ntheta",
    "continuation.kappa_target",
    "continuation.steps",
    "glue.n",
    "dynamics.delta",
    "dynamics.T",
    "dynamics.dt",
    "dynamics.trials",
    "dynamics.seed",
    "dynamics.parallel",
    "critical.tol_rel",
    "output.directory",
    "output.formats",
];

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

fn real(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| err(line, format!("{key}: expected a number, got '{v}'")))?;
    if !x.is_finite() {
        return Err(err(line, format!("{key}: value must be finite")));
    }
    Ok(x)
}

fn integer<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| err(line, format!("{key}: expected a non-negative integer, got '{v}'")))
}

fn boolean(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(err(line, format!("{key}: expected true or false, got '{v}'"))),
    }
}

fn list<T>(v: &str, mut item: impl FnMut(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(&mut item).collect()
}

/// Parses and validates configuration text; missing keys keep their defaults.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut c = Config::default();
    let mut seen: Vec<(&str, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| err(line, format!("expected 'section.key = value', got '{content}'")))?;
        let (key, v) = (key.trim(), value.trim());
        let known = KEYS.iter().find(|k| **k == key).ok_or_else(|| err(line, format!("unknown key '{key}'")))?;
        if let Some((_, first)) = seen.iter().find(|(k, _)| k == known) {
            return Err(err(line, format!("duplicate key '{key}' (first set on line {first})")));
        }
        seen.push((known, line));
        match key {
            "profile.a" => c.profile.a = real(line, key, v)?,
            "profile.A" => c.profile.amplitude = real(line, key, v)?,
            "profile.l" => c.profile.l = real(line, key, v)?,
            "profile.spline_file" => c.profile.spline_file = if v.is_empty() || v == "none" { None } else { Some(v.to_string()) },
            "pattern.beta" => c.pattern.beta = real(line, key, v)?,
            "pattern.p" => c.pattern.p = integer(line, key, v)?,
            "pattern.beta_min" => c.pattern.beta_min = real(line, key, v)?,
            "pattern.beta_max" => c.pattern.beta_max = real(line, key, v)?,
            "pattern.beta_steps" => c.pattern.beta_steps = integer(line, key, v)?,
            "pattern.amplitudes" => c.pattern.amplitudes = list(v, |s| real(line, key, s))?,
            "grid.Ns" => c.grid.ns = integer(line, key, v)?,
            "grid.Ntheta" => c.grid.ntheta = integer(line, key, v)?,
            "continuation.kappa_target" => c.continuation.kappa_target = real(line, key, v)?,
            "continuation.steps" => c.continuation.steps = integer(line, key, v)?,
            "glue.n" => {
                c.glue.n = if v == "auto" {
                    GlueCount::Auto
                } else {
                    let n: i64 = v.parse().map_err(|_| err(line, format!("glue.n: expected 'auto' or an integer, got '{v}'")))?;
                    if n < 2 {
                        return Err(err(line, "n ≥ 2 required"));
                    }
                    GlueCount::Fixed(n as usize)
                }
            }
            "dynamics.delta" => c.dynamics.delta = real(line, key, v)?,
            "dynamics.T" => c.dynamics.t_end = real(line, key, v)?,
            "dynamics.dt" => c.dynamics.dt = if v == "auto" { None } else { Some(real(line, key, v)?) },
            "dynamics.trials" => c.dynamics.trials = integer(line, key, v)?,
            "dynamics.seed" => c.dynamics.seed = integer(line, key, v)?,
            "dynamics.parallel" => c.dynamics.parallel = boolean(line, key, v)?,
            "critical.tol_rel" => c.critical.tol_rel = real(line, key, v)?,
            "output.directory" => c.output.directory = v.to_string(),
            "output.formats" => {
                c.output.formats = list(v, |s| Format::parse(s).ok_or_else(|| err(line, format!("unknown format '{s}' (json, csv, obj)"))))?
            }
            _ => unreachable!("key table and match arms agree"),
        }
    }
    let line_of = |key: &str| seen.iter().find(|(k, _)| *k == key).map_or(0, |(_, l)| *l);
    validate(&c, line_of)?;
    Ok(c)
}

fn validate(c: &Config, line_of: impl Fn(&str) -> usize) -> Result<()> {
    let check = |ok: bool, key: &str, msg: String| if ok { Ok(()) } else { Err(err(line_of(key), msg)) };
    let p = &c.profile;
    check(p.a > 0.0, "profile.a", format!("profile.a must be positive, got {}", p.a))?;
    check(p.amplitude.abs() < p.a, "profile.A", format!("|profile.A| must be below profile.a (radius must stay positive), got {}", p.amplitude))?;
    check(p.l > 0.0, "profile.l", format!("profile.l must be positive, got {}", p.l))?;
    let q = &c.pattern;
    check(q.beta > 0.0, "pattern.beta", format!("pattern.beta must be positive, got {}", q.beta))?;
    check(q.p == 2 || q.p == 3, "pattern.p", format!("pattern.p must be 2 or 3, got {}", q.p))?;
    check(q.beta_min > 0.0 && q.beta_max >= q.beta_min, "pattern.beta_max", "need 0 < pattern.beta_min <= pattern.beta_max".into())?;
    check(q.beta_steps >= 1, "pattern.beta_steps", "pattern.beta_steps must be at least 1".into())?;
    check(q.amplitudes.iter().all(|x| x.abs() < p.a), "pattern.amplitudes", "every scan amplitude must satisfy |A| < profile.a".into())?;
    check(c.grid.ns >= 8, "grid.Ns", format!("grid.Ns must be at least 8, got {}", c.grid.ns))?;
    check(c.grid.ntheta >= 8, "grid.Ntheta", format!("grid.Ntheta must be at least 8, got {}", c.grid.ntheta))?;
    check(c.grid.ntheta % 2 == 0, "grid.Ntheta", "grid.Ntheta must be even (theta = pi must be a node)".into())?;
    let k = &c.continuation;
    check(k.kappa_target >= 0.0, "continuation.kappa_target", "continuation.kappa_target must be non-negative".into())?;
    let max_psi = if p.spline_file.is_some() { 0.0 } else { p.a + p.amplitude.abs() };
    check(
        k.kappa_target * max_psi < 1.0,
        "continuation.kappa_target",
        format!("self-intersecting tube: kappa_target * max Psi = {} >= 1", k.kappa_target * max_psi),
    )?;
    check(k.steps >= 1, "continuation.steps", "continuation.steps must be at least 1".into())?;
    let d = &c.dynamics;
    check(d.delta > 0.0, "dynamics.delta", format!("dynamics.delta must be positive, got {}", d.delta))?;
    check(d.t_end > 0.0, "dynamics.T", format!("dynamics.T must be positive, got {}", d.t_end))?;
    if let Some(dt) = d.dt {
        check(dt > 0.0 && dt <= d.t_end, "dynamics.dt", format!("dynamics.dt must lie in (0, T], got {dt}"))?;
    }
    check(c.critical.tol_rel > 0.0 && c.critical.tol_rel < 1.0, "critical.tol_rel", "critical.tol_rel must lie in (0, 1)".into())?;
    check(!c.output.directory.is_empty(), "output.directory", "output.directory must not be empty".into())?;
    check(!c.output.formats.is_empty(), "output.formats", "output.formats must list at least one format".into())?;
    Ok(())
}

/// Canonical text form; [`parse_config`] reads it back to an equal value.
pub fn serialize_config(c: &Config) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("writing to a String");
    let list = |xs: &[f64]| xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
    put("profile.a", format!("{:?}", c.profile.a));
    put("profile.A", format!("{:?}", c.profile.amplitude));
    put("profile.l", format!("{:?}", c.profile.l));
    put("profile.spline_file", c.profile.spline_file.clone().unwrap_or_else(|| "none".into()));
    put("pattern.beta", format!("{:?}", c.pattern.beta));
    put("pattern.p", c.pattern.p.to_string());
    put("pattern.beta_min", format!("{:?}", c.pattern.beta_min));
    put("pattern.beta_max", format!("{:?}", c.pattern.beta_max));
    put("pattern.beta_steps", c.pattern.beta_steps.to_string());
    put("pattern.amplitudes", list(&c.pattern.amplitudes));
    put("grid.Ns", c.grid.ns.to_string());
    put("grid.Ntheta", c.grid.ntheta.to_string());
    put("continuation.kappa_target", format!("{:?}", c.continuation.kappa_target));
    put("continuation.steps", c.continuation.steps.to_string());
    put(
        "glue.n",
        match c.glue.n {
            GlueCount::Auto => "auto".into(),
            GlueCount::Fixed(n) => n.to_string(),
        },
    );
    put("dynamics.delta", format!("{:?}", c.dynamics.delta));
    put("dynamics.T", format!("{:?}", c.dynamics.t_end));
    put("dynamics.dt", c.dynamics.dt.map_or("auto".into(), |x| format!("{x:?}")));
    put("dynamics.trials", c.dynamics.trials.to_string());
    put("dynamics.seed", c.dynamics.seed.to_string());
    put("dynamics.parallel", c.dynamics.parallel.to_string());
    put("critical.tol_rel", format!("{:?}", c.critical.tol_rel));
    put("output.directory", c.output.directory.clone());
    put("output.formats", c.output.formats.iter().map(|f| f.name()).collect::<Vec<_>>().join(", "));
    out
}
