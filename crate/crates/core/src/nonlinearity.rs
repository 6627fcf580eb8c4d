//! Monotone pattern profiles `U(s)` and the reaction terms `f` that make them
//! stationary on a surface of revolution.

use std::f64::consts::PI;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ProfileCurve, MIN_TABLE_KNOTS};
use crate::grid::{Grid2D, ScalarField};
use crate::io::fmt_f64;
use crate::operator::assemble;
use crate::spline::MonotoneCubic;

/// Endpoint `f'` magnitude above which a synthesis is flagged as stiff.
pub const STIFF_THRESHOLD: f64 = 1e6;

/// `U'(s) = β sinᵖ(πs/l)`, `U(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternProfile {
    length: f64,
    beta: f64,
    p: u32,
}

pub fn make_pattern_profile(length: f64, beta: f64, p: u32) -> Result<PatternProfile> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidArgument(format!("length must be positive, got {length}")));
    }
    if p != 2 && p != 3 {
        return Err(Error::InvalidArgument(format!("exponent p must be 2 or 3, got {p}")));
    }
    Ok(PatternProfile { length, beta, p })
}

impl PatternProfile {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn exponent(&self) -> u32 {
        self.p
    }

    /// `[U, U', U'', U''']` at `s`.
    pub fn eval(&self, s: f64) -> [f64; 4] {
        let (b, w) = (self.beta, PI / self.length);
        let (sn, cs) = (w * s).sin_cos();
        match self.p {
            2 => [
                b * (s / 2.0 - (2.0 * w * s).sin() / (4.0 * w)),
                b * sn * sn,
                b * w * (2.0 * w * s).sin(),
                2.0 * b * w * w * (2.0 * w * s).cos(),
            ],
            _ => [
                // sin³x = (3 sin x − sin 3x)/4
                b * (3.0 * (1.0 - cs) / (4.0 * w) - (1.0 - (3.0 * w * s).cos()) / (12.0 * w)),
                b * sn * sn * sn,
                3.0 * b * w * sn * sn * cs,
                3.0 * b * w * w * (2.0 * sn * cs * cs - sn * sn * sn),
            ],
        }
    }

    pub fn u(&self, s: f64) -> f64 {
        self.eval(s)[0]
    }

    /// Samples `U` on the nodes of `grid` (θ-independent).
    pub fn sample(&self, grid: &Grid2D) -> ScalarField {
        ScalarField::from_fn(*grid, |s, _| self.u(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisMode {
    /// Tabulate the closed-form reaction term at ≥ 512 knots.
    Continuous,
    /// `f(U_i) = −(Δ_h U)_i` on a grid, so the sampled pattern is an exact
    /// discrete equilibrium there.
    DiscreteExact,
}

/// A C¹ reaction term: monotone-cubic table, extended linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    table: MonotoneCubic,
    warnings: Vec<String>,
}

impl Nonlinearity {
    /// `f(u) = a + b·u`.
    pub fn affine(a: f64, b: f64) -> Self {
        let table = MonotoneCubic::with_slopes(vec![0.0, 1.0], vec![a, a + b], vec![b, b]).expect("two finite knots");
        Self { table, warnings: Vec::new() }
    }

    /// Table with PCHIP slopes.
    pub fn from_table(u: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        Ok(Self { table: MonotoneCubic::new(u, f)?, warnings: Vec::new() })
    }

    pub fn eval_f(&self, u: f64) -> f64 {
        self.table.eval_with_derivative(u).0
    }

    pub fn eval_fprime(&self, u: f64) -> f64 {
        self.table.eval_with_derivative(u).1
    }

    pub fn eval_both(&self, u: f64) -> (f64, f64) {
        self.table.eval_with_derivative(u)
    }

    pub fn knots(&self) -> &[f64] {
        self.table.knots()
    }

    pub fn values(&self) -> &[f64] {
        self.table.values()
    }

    pub fn slopes(&self) -> &[f64] {
        self.table.slopes()
    }

    /// `[u₀, u_K]`, the tabulated range.
    pub fn range(&self) -> (f64, f64) {
        let k = self.table.knots();
        (k[0], k[k.len() - 1])
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Nodewise `f(u)`.
    pub fn apply(&self, u: &ScalarField) -> ScalarField {
        u.map(|v| self.eval_f(v))
    }

    /// Nodewise `f'(u)`.
    pub fn potential(&self, u: &ScalarField) -> ScalarField {
        u.map(|v| self.eval_fprime(v))
    }

    /// Largest and smallest `f'` over `[lo, hi]`, sampling the knots inside
    /// and the interval ends.
    pub fn fprime_bounds(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut visit = |u: f64| {
            let d = self.eval_fprime(u);
            min = min.min(d);
            max = max.max(d);
        };
        visit(lo);
        visit(hi);
        let k = self.table.knots();
        let a = k.partition_point(|&x| x < lo);
        let b = k.partition_point(|&x| x <= hi);
        for i in a..b {
            visit(k[i]);
            if i + 1 < k.len() {
                // the cubic's derivative is quadratic; check the interval midpoint too
                visit(0.5 * (k[i] + k[i + 1]));
            }
        }
        (min, max)
    }

    /// CSV with header `u,f,fp`, one row per knot.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "u,f,fp")?;
        for ((u, f), d) in self.knots().iter().zip(self.values()).zip(self.slopes()) {
            writeln!(w, "{},{},{}", fmt_f64(*u), fmt_f64(*f), fmt_f64(*d))?;
        }
        Ok(())
    }
}

/// `f[U(s)]` from the profile and pattern, with `d/ds f[U(s)]`.
fn reaction_along_s(p: &ProfileCurve, u: &PatternProfile, s: f64) -> (f64, f64) {
    let [psi, p1, p2, p3] = p.eval(s);
    let [_, u1, u2, u3] = u.eval(s);
    let q = 1.0 + p1 * p1;
    let a = p1 * u1 + psi * u2;
    let b = psi * q;
    let c = p1 * p2 * u1;
    let d = q * q;
    let da = p2 * u1 + 2.0 * p1 * u2 + psi * u3;
    let db = p1 * q + 2.0 * psi * p1 * p2;
    let dc = p2 * p2 * u1 + p1 * p3 * u1 + p1 * p2 * u2;
    let dd = 4.0 * q * p1 * p2;
    let f = -a / b + c / d;
    let df = -(da * b - a * db) / (b * b) + (dc * d - c * dd) / (d * d);
    (f, df)
}

/// Synthesizes `f` so that `u` is stationary on the surface of revolution `p`.
///
/// `grid` is required in discrete-exact mode and must be a Neumann grid of
/// length `l`.
pub fn synthesize_f(p: &ProfileCurve, u: &PatternProfile, mode: SynthesisMode, grid: Option<&Grid2D>) -> Result<Nonlinearity> {
    let l = p.length();
    if (u.length() - l).abs() > 1e-12 * l {
        return Err(Error::InvalidArgument(format!("profile length {l} differs from pattern length {}", u.length())));
    }
    match mode {
        SynthesisMode::Continuous => synthesize_continuous(p, u),
        SynthesisMode::DiscreteExact => {
            let grid = grid.ok_or_else(|| Error::InvalidArgument("discrete-exact synthesis needs a grid".into()))?;
            synthesize_discrete(p, u, grid)
        }
    }
}

fn check_monotone(s: &[f64], v: &[f64]) -> Result<()> {
    for k in 0..v.len() - 1 {
        if v[k + 1] <= v[k] {
            let slope = (v[k + 1] - v[k]) / (s[k + 1] - s[k]);
            return Err(Error::NonMonotonePattern { s: s[k], slope });
        }
    }
    Ok(())
}

fn synthesize_continuous(p: &ProfileCurve, u: &PatternProfile) -> Result<Nonlinearity> {
    let l = p.length();
    let k = MIN_TABLE_KNOTS;
    let h = l / (k - 1) as f64;
    let s: Vec<f64> = (0..k).map(|i| if i == k - 1 { l } else { i as f64 * h }).collect();
    for &si in &s[1..k - 1] {
        let slope = u.eval(si)[1];
        if !(slope > 0.0) {
            return Err(Error::NonMonotonePattern { s: si, slope });
        }
    }
    let uk: Vec<f64> = s.iter().map(|&x| u.u(x)).collect();
    check_monotone(&s, &uk)?;
    let chain = |x: f64| {
        let (_, df) = reaction_along_s(p, u, x);
        df / u.eval(x)[1]
    };
    let mut fk = Vec::with_capacity(k);
    let mut dk = Vec::with_capacity(k);
    for (i, &x) in s.iter().enumerate() {
        fk.push(reaction_along_s(p, u, x).0);
        let d = if i == 0 {
            richardson(|e| chain(e), h)
        } else if i == k - 1 {
            richardson(|e| chain(l - e), h)
        } else {
            chain(x)
        };
        dk.push(d);
    }
    let mut warnings = Vec::new();
    for (end, d) in [("lower", dk[0]), ("upper", dk[k - 1])] {
        if !d.is_finite() || d.abs() > STIFF_THRESHOLD {
            warnings.push(format!("stiff synthesis: f' one-sided limit at the {end} end is {d:e}"));
        }
    }
    let dk: Vec<f64> = dk.into_iter().map(|d| if d.is_finite() { d } else { 0.0 }).collect();
    let table = MonotoneCubic::with_slopes(uk, fk, dk)?;
    Ok(Nonlinearity { table, warnings })
}

/// One-sided limit of `g(ε)` as `ε → 0⁺` from `ε = h, h/2, h/4`
/// (two Richardson levels assuming an error expansion in powers of `ε`).
fn richardson(g: impl Fn(f64) -> f64, h: f64) -> f64 {
    let (a, b, c) = (g(h), g(h / 2.0), g(h / 4.0));
    let ab = 2.0 * b - a;
    let bc = 2.0 * c - b;
    (4.0 * bc - ab) / 3.0
}

fn synthesize_discrete(p: &ProfileCurve, u: &PatternProfile, grid: &Grid2D) -> Result<Nonlinearity> {
    let axis = grid.with_ntheta(1)?;
    let op = assemble(p, &axis)?;
    let field = u.sample(&axis);
    let lap = op.apply(&field)?;
    let s: Vec<f64> = (0..axis.ns()).map(|i| axis.s(i)).collect();
    let uk = field.into_values();
    check_monotone(&s, &uk)?;
    let fk: Vec<f64> = lap.values().iter().map(|v| -v).collect();
    Ok(Nonlinearity { table: MonotoneCubic::new(uk, fk)?, warnings: Vec::new() })
}
