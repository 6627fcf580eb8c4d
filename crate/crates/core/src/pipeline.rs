//! End-to-end construction: base pattern on the straight tube, continuation
//! in curvature, gluing into a closed genus-1 surface, and verification of
//! the glued pattern (residual, spectrum, dynamics, critical points).

use std::f64::consts::PI;
use std::fs;

use serde_json::{json, Map, Value};

use crate::config::{Config, GlueCount};
use crate::continuation::{continue_in_kappa, solve_at_kappa, ContinuationTrace, KappaSolution, SolveSettings};
use crate::critical::{count_critical_points, CriticalReport};
use crate::dynamics::{stability_probe, ProbeReport, ProbeSettings};
use crate::error::{Error, Result};
use crate::geometry::{check_admissibility, glue, AdmissibilityReport, GluedSurface, ProfileCurve};
use crate::grid::{Grid2D, ScalarField};
use crate::io::json_f64;
use crate::nonlinearity::{make_pattern_profile, synthesize_f, Nonlinearity, PatternProfile, SynthesisMode};
use crate::operator::{assemble, DiscreteOperator};
use crate::solvers::{principal_eigenpair, principal_eigenpair_seeded, residual_norm, EigenPair};

/// Smallest `λ₁` accepted for a base pattern.
pub const MIN_BASE_LAMBDA: f64 = 0.01;
/// Glued curvature must satisfy `κ ≤ N_SAFETY · κ₀` when `n` is automatic.
pub const N_SAFETY: f64 = 0.8;
pub const GLOBAL_RESIDUAL_TOL: f64 = 1e-8;
pub const CONTINUATION_RESIDUAL_TOL: f64 = 1e-10;

/// Reads a two-column `s Ψ` table (whitespace separated, `#` comments).
pub fn read_profile_table(path: &str) -> Result<ProfileCurve> {
    let text = fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read {path}: {e}")))?;
    let (mut s, mut psi) = (Vec::new(), Vec::new());
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let parse = |v: &str| v.parse::<f64>().map_err(|_| Error::Parse(format!("{path}:{}: bad number '{v}'", k + 1)));
        if cols.len() != 2 {
            return Err(Error::Parse(format!("{path}:{}: expected two columns", k + 1)));
        }
        s.push(parse(cols[0])?);
        psi.push(parse(cols[1])?);
    }
    ProfileCurve::from_table(s, psi)
}

/// The profile named by the configuration, with neck amplitude `amplitude`.
pub fn build_profile(cfg: &Config, amplitude: f64) -> Result<ProfileCurve> {
    match &cfg.profile.spline_file {
        Some(path) => read_profile_table(path),
        None => ProfileCurve::cosine(cfg.profile.a, amplitude, cfg.profile.l),
    }
}

#[derive(Debug, Clone)]
pub struct ScanEntry {
    pub amplitude: f64,
    pub p: u32,
    pub beta: f64,
    pub lambda1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BasePattern {
    pub profile: ProfileCurve,
    pub amplitude: f64,
    pub admissibility: AdmissibilityReport,
    pub pattern: PatternProfile,
    pub nonlinearity: Nonlinearity,
    pub operator: DiscreteOperator,
    pub field: ScalarField,
    pub residual: f64,
    pub eigen: EigenPair,
    pub scan: Vec<ScanEntry>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn try_member(cfg: &Config, amplitude: f64, p: u32, beta: f64, grid: &Grid2D) -> Result<BasePattern> {
    let profile = build_profile(cfg, amplitude)?;
    let admissibility = check_admissibility(&profile);
    if !admissibility.criterion_satisfied {
        return Err(Error::CriterionNotSatisfied { margin: admissibility.best_margin, s0: admissibility.best_s0 });
    }
    if !admissibility.passed() {
        return Err(Error::InvalidArgument(format!("inadmissible profile: {}", admissibility.failures().join("; "))));
    }
    let pattern = make_pattern_profile(profile.length(), beta, p)?;
    let nonlinearity = synthesize_f(&profile, &pattern, SynthesisMode::DiscreteExact, Some(grid))?;
    let operator = assemble(&profile, grid)?;
    let field = pattern.sample(grid);
    let residual = residual_norm(&operator, &nonlinearity, &field)?;
    let eigen = principal_eigenpair(&operator, &nonlinearity.potential(&field), 1e-10)?;
    Ok(BasePattern { profile, amplitude, admissibility, pattern, nonlinearity, operator, field, residual, eigen, scan: Vec::new() })
}

/// Synthesizes the configured base pattern and checks `λ₁ ≥ 0.01`; failing
/// that, scans neck amplitudes, exponents and `β` for the first member that
/// does.
pub fn build_base_pattern(cfg: &Config) -> Result<BasePattern> {
    let grid = Grid2D::neumann(cfg.grid.ns, cfg.grid.ntheta, cfg.profile.l)?;
    let first = try_member(cfg, cfg.profile.amplitude, cfg.pattern.p, cfg.pattern.beta, &grid)?;
    let mut scan = vec![ScanEntry { amplitude: first.amplitude, p: cfg.pattern.p, beta: cfg.pattern.beta, lambda1: Some(first.eigen.lambda1) }];
    if first.eigen.lambda1 >= MIN_BASE_LAMBDA {
        return Ok(BasePattern { scan, ..first });
    }
    let amplitudes = if cfg.profile.spline_file.is_some() { vec![cfg.profile.amplitude] } else { cfg.pattern.amplitudes.clone() };
    let exponents = if cfg.pattern.p == 2 { [2, 3] } else { [3, 2] };
    for &amplitude in &amplitudes {
        for p in exponents {
            for beta in linspace(cfg.pattern.beta_min, cfg.pattern.beta_max, cfg.pattern.beta_steps) {
                match try_member(cfg, amplitude, p, beta, &grid) {
                    Ok(member) => {
                        let lambda1 = member.eigen.lambda1;
                        scan.push(ScanEntry { amplitude, p, beta, lambda1: Some(lambda1) });
                        if lambda1 >= MIN_BASE_LAMBDA {
                            return Ok(BasePattern { scan, ..member });
                        }
                    }
                    Err(_) => scan.push(ScanEntry { amplitude, p, beta, lambda1: None }),
                }
            }
        }
    }
    Err(Error::NoStableBasePattern)
}

/// Smallest `n ≥ 2` with `π/(n l) ≤ 0.8 κ₀`.
pub fn choose_n(l: f64, kappa0: f64) -> Result<usize> {
    if !(kappa0 > 0.0) {
        return Err(Error::NoContinuationNeighborhood);
    }
    Ok(((PI / (l * N_SAFETY * kappa0)).ceil() as usize).max(2))
}

/// Global field on the glued surface by even reflection of the piece
/// solution across every junction.
pub fn assemble_global_pattern(g: &GluedSurface, piece: &ScalarField) -> Result<ScalarField> {
    let pg = piece.grid();
    if pg.is_periodic() || (pg.extent() - g.profile().length()).abs() > 1e-12 * pg.extent() {
        return Err(Error::GridMismatch("piece field must live on a Neumann grid of length l".into()));
    }
    let (nsp, nt) = (pg.ns(), pg.ntheta());
    let grid = Grid2D::periodic(2 * g.copies() * nsp, nt, g.period())?;
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.ns() {
        let (m, r) = (i / nsp, i % nsp);
        let src = if m % 2 == 0 { r } else { nsp - 1 - r };
        for j in 0..nt {
            values.push(piece.get(src, j));
        }
    }
    ScalarField::new(grid, values)
}

/// Nodes on either side of junction `m`, at θ index `j`.
pub fn junction_nodes(grid: &Grid2D, piece_ns: usize, m: usize, j: usize) -> [usize; 2] {
    let ns = grid.ns();
    let after = (m * piece_ns) % ns;
    let before = (after + ns - 1) % ns;
    [grid.index(before, j), grid.index(after, j)]
}

#[derive(Debug, Clone)]
pub struct SymmetryPoint {
    pub s: f64,
    pub theta: f64,
    pub cluster: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CriticalSummary {
    pub report: CriticalReport,
    pub symmetry_points: Vec<SymmetryPoint>,
    /// Distinct clusters touching each junction circle.
    pub clusters_per_junction: Vec<usize>,
}

impl CriticalSummary {
    pub fn all_symmetry_points_covered(&self) -> bool {
        self.symmetry_points.iter().all(|p| p.cluster.is_some())
    }

    pub fn passes(&self, n: usize) -> bool {
        self.report.count >= 4 * n && self.all_symmetry_points_covered() && self.clusters_per_junction.iter().all(|&c| c >= 2)
    }
}

/// Critical points of the glued pattern with the `4n` symmetry points
/// (`s` at a junction, `θ ∈ {0, π}`) located among the clusters.
pub fn critical_summary(op: &DiscreteOperator, u: &ScalarField, g: &GluedSurface, piece_ns: usize, tol_rel: f64) -> Result<CriticalSummary> {
    let report = count_critical_points(op, u, tol_rel)?;
    let grid = *op.grid();
    let nt = grid.ntheta();
    let l = g.profile().length();
    let mut symmetry_points = Vec::new();
    let mut clusters_per_junction = Vec::new();
    for m in 0..2 * g.copies() {
        for (j, theta) in [(0, 0.0), (nt / 2, PI)] {
            let nodes = junction_nodes(&grid, piece_ns, m, j);
            symmetry_points.push(SymmetryPoint { s: m as f64 * l, theta, cluster: report.cluster_of(&nodes) });
        }
        let mut ids: Vec<usize> = (0..nt)
            .flat_map(|j| junction_nodes(&grid, piece_ns, m, j))
            .filter_map(|k| report.cluster_of(&[k]))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        clusters_per_junction.push(ids.len());
    }
    Ok(CriticalSummary { report, symmetry_points, clusters_per_junction })
}

/// `max |U(s, θ) − U(s, −θ)|`.
pub fn theta_reflection_defect(u: &ScalarField) -> f64 {
    let g = u.grid();
    let nt = g.ntheta();
    let mut m = 0.0f64;
    for i in 0..g.ns() {
        for j in 0..nt {
            m = m.max((u.get(i, j) - u.get(i, (nt - j) % nt)).abs());
        }
    }
    m
}

#[derive(Debug, Clone)]
pub struct GluedPattern {
    pub n: usize,
    pub surface: GluedSurface,
    pub piece: KappaSolution,
    pub field: ScalarField,
    pub operator: DiscreteOperator,
    pub residual: f64,
}

/// Glues `2n` copies and reflects the piece solution at `κ = π/(nl)`,
/// warm-started from the nearest continuation step.
pub fn build_glued_pattern(base: &BasePattern, trace: &ContinuationTrace, n: usize, settings: &SolveSettings) -> Result<GluedPattern> {
    let surface = glue(&base.profile, n, Some(trace.kappa0()))?;
    let init = &trace.nearest(surface.kappa()).solution;
    let piece = solve_at_kappa(&base.profile, &base.nonlinearity, base.field.grid(), surface.kappa(), init, settings)?;
    let field = assemble_global_pattern(&surface, &piece.newton.solution)?;
    let operator = assemble(&surface, field.grid())?;
    let residual = residual_norm(&operator, &base.nonlinearity, &field)?;
    Ok(GluedPattern { n, surface, piece, field, operator, residual })
}

/// Everything computed by [`run_verification`]; stages after a failure are `None`.
#[derive(Debug, Clone, Default)]
pub struct VerificationRun {
    pub base: Option<BasePattern>,
    pub trace: Option<ContinuationTrace>,
    pub glued: Option<GluedPattern>,
    pub global_eigen: Option<EigenPair>,
    pub probe: Option<ProbeReport>,
    pub critical: Option<CriticalSummary>,
    pub failure: Option<(String, Error)>,
}

impl VerificationRun {
    pub fn checks(&self) -> Vec<(&'static str, bool)> {
        let mut out = Vec::new();
        if let Some(b) = &self.base {
            out.push(("base_lambda1", b.eigen.lambda1 >= MIN_BASE_LAMBDA));
        }
        if let Some(t) = &self.trace {
            out.push(("continuation_residuals", t.steps.iter().all(|s| s.residual <= CONTINUATION_RESIDUAL_TOL)));
        }
        if let (Some(g), Some(t)) = (&self.glued, &self.trace) {
            out.push(("kappa_below_kappa0", g.surface.kappa() < t.kappa0()));
            out.push(("global_residual", g.residual <= GLOBAL_RESIDUAL_TOL));
        }
        if let Some(e) = &self.global_eigen {
            out.push(("global_lambda1", e.lambda1 > 0.0));
        }
        if let Some(p) = &self.probe {
            out.push(("dynamics", p.pass));
        }
        if let (Some(c), Some(g)) = (&self.critical, &self.glued) {
            out.push(("critical_points", c.passes(g.n)));
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.critical.is_some() && self.checks().iter().all(|(_, ok)| *ok)
    }
}

pub fn solve_settings(cfg: &Config) -> SolveSettings {
    SolveSettings { seed: cfg.dynamics.seed, ..SolveSettings::default() }
}

/// Resolves the glue count: a fixed `n` must satisfy `π/(nl) < κ₀`.
pub fn resolve_n(cfg: &Config, profile: &ProfileCurve, kappa0: f64) -> Result<usize> {
    match cfg.glue.n {
        GlueCount::Auto => choose_n(profile.length(), kappa0),
        GlueCount::Fixed(n) => {
            glue(profile, n, Some(kappa0))?;
            Ok(n)
        }
    }
}

/// Runs every stage; the first failing stage is recorded and later stages
/// are skipped.
pub fn run_verification(cfg: &Config) -> VerificationRun {
    let mut run = VerificationRun::default();
    let settings = solve_settings(cfg);
    macro_rules! stage {
        ($name:expr, $e:expr) => {
            match $e {
                Ok(v) => v,
                Err(e) => {
                    run.failure = Some(($name.to_string(), e));
                    return run;
                }
            }
        };
    }
    let base = stage!("base", build_base_pattern(cfg));
    run.base = Some(base.clone());
    if let GlueCount::Fixed(n) = cfg.glue.n {
        // reject self-intersecting gluings before the continuation runs
        stage!("glue", glue(&base.profile, n, None));
    }
    let trace = stage!(
        "continuation",
        continue_in_kappa(&base.profile, &base.nonlinearity, &base.field, cfg.continuation.kappa_target, cfg.continuation.steps, &settings)
    );
    run.trace = Some(trace.clone());
    let n = stage!("glue", resolve_n(cfg, &base.profile, trace.kappa0()));
    let glued = stage!("glue", build_glued_pattern(&base, &trace, n, &settings));
    run.glued = Some(glued.clone());
    let eigen = stage!(
        "global",
        principal_eigenpair_seeded(&glued.operator, &base.nonlinearity.potential(&glued.field), 1e-10, cfg.dynamics.seed, 3)
    );
    run.global_eigen = Some(eigen);
    let probe_settings = ProbeSettings {
        delta: cfg.dynamics.delta * glued.field.sup_norm(),
        t_end: cfg.dynamics.t_end,
        dt: cfg.dynamics.dt,
        random_trials: cfg.dynamics.trials,
        seed: cfg.dynamics.seed,
        parallel: cfg.dynamics.parallel,
    };
    let probe = stage!("dynamics", stability_probe(&glued.operator, &base.nonlinearity, &glued.field, &probe_settings));
    run.probe = Some(probe);
    let crit = stage!(
        "critical_points",
        critical_summary(&glued.operator, &glued.field, &glued.surface, cfg.grid.ns, cfg.critical.tol_rel)
    );
    run.critical = Some(crit);
    run
}

/// Rewrites every non-integer JSON number with 17 significant digits.
fn normalize_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.as_i64().is_none() && n.as_u64().is_none() => {
            if let Some(x) = n.as_f64() {
                *v = json_f64(x);
            }
        }
        Value::Array(a) => a.iter_mut().for_each(normalize_numbers),
        Value::Object(o) => o.values_mut().for_each(normalize_numbers),
        _ => {}
    }
}

fn f(x: f64) -> Value {
    json_f64(x)
}

pub fn base_json(b: &BasePattern) -> Value {
    let grid = b.field.grid();
    json!({
        "profile": {
            "kind": match b.profile.shape() { crate::geometry::ProfileShape::Table(_) => "table", _ => "cosine" },
            "A": f(b.amplitude),
            "l": f(b.profile.length()),
            "min_psi": f(b.admissibility.min_psi),
            "max_psi": f(b.profile.max_psi()),
        },
        "criterion": {
            "s0": f(b.admissibility.best_s0),
            "margin": f(b.admissibility.best_margin),
            "satisfied": b.admissibility.criterion_satisfied,
        },
        "pattern": { "beta": f(b.pattern.beta()), "p": b.pattern.exponent(), "synthesis": "discrete_exact" },
        "grid": { "Ns": grid.ns(), "Ntheta": grid.ntheta() },
        "residual": f(b.residual),
        "lambda1": f(b.eigen.lambda1),
        "scan": b.scan.iter().map(|e| json!({
            "A": f(e.amplitude), "p": e.p, "beta": f(e.beta),
            "lambda1": e.lambda1.map_or(Value::Null, f),
        })).collect::<Vec<_>>(),
        "warnings": b.nonlinearity.warnings(),
    })
}

pub fn continuation_json(t: &ContinuationTrace) -> Value {
    json!({
        "kappa_target": f(t.target),
        "kappa0": f(t.kappa0()),
        "kappa0_note": "largest verified curvature at this grid resolution; resolution dependent",
        "reached_target": t.reached_target(),
        "halvings": t.halvings,
        "stop_reason": t.stop_reason,
        "steps": t.steps.iter().map(|s| json!({
            "kappa": f(s.kappa),
            "residual": f(s.residual),
            "lambda1": f(s.lambda1),
            "sup_gap": f(s.sup_gap),
            "theta_variation": f(s.theta_variation),
            "newton_iterations": s.newton_iterations,
        })).collect::<Vec<_>>(),
    })
}

fn glue_json(g: &GluedPattern, t: &ContinuationTrace, ug: &ScalarField) -> Value {
    let l = g.surface.profile().length();
    let bound = PI / (l * t.kappa0());
    json!({
        "n": g.n,
        "kappa": f(g.surface.kappa()),
        "kappa0": f(t.kappa0()),
        "n_lower_bound": f(bound),
        "consistent": (g.n as f64) > bound && g.surface.kappa() < t.kappa0(),
        "newton_residual": f(g.piece.newton.residual),
        "sup_gap": f(g.piece.newton.solution.sup_distance(ug).unwrap_or(f64::NAN)),
        "lambda1_kappa": f(g.piece.eigen.lambda1),
        "theta_variation": f(g.piece.newton.solution.theta_variation()),
    })
}

fn global_json(g: &GluedPattern, e: Option<&EigenPair>) -> Value {
    let grid = g.field.grid();
    json!({
        "grid": { "Ns": grid.ns(), "Ntheta": grid.ntheta(), "period": f(g.surface.period()) },
        "residual": f(g.residual),
        "lambda1": e.map_or(Value::Null, |e| f(e.lambda1)),
        "theta_reflection_defect": f(theta_reflection_defect(&g.field)),
        "sup_norm": f(g.field.sup_norm()),
    })
}

fn dynamics_json(p: &ProbeReport, delta_rel: f64) -> Value {
    json!({
        "delta": f(p.delta),
        "delta_rel": f(delta_rel),
        "T": f(p.t_end),
        "dt": f(p.dt),
        "thresholds": "max deviation <= 2 delta and final deviation <= delta/10 (conventions)",
        "trials": p.trials.iter().map(|t| json!({
            "label": t.label,
            "max_deviation": f(t.max_deviation),
            "final_deviation": f(t.final_deviation),
            "pass": t.pass,
        })).collect::<Vec<_>>(),
        "max_deviation": f(p.max_deviation),
        "sandwich_violation": f(p.sandwich_violation),
        "sandwich_holds": p.sandwich_holds,
        "pass": p.pass,
    })
}

fn critical_json(c: &CriticalSummary, n: usize, tol_rel: f64) -> Value {
    json!({
        "tol_rel": f(tol_rel),
        "count": c.report.count,
        "required": 4 * n,
        "all_symmetry_points_covered": c.all_symmetry_points_covered(),
        "clusters_per_junction": c.clusters_per_junction,
        "symmetry_points": c.symmetry_points.iter().map(|p| json!({
            "s": f(p.s), "theta": f(p.theta), "cluster": p.cluster,
        })).collect::<Vec<_>>(),
        "clusters": c.report.clusters.iter().map(|k| json!({
            "s": f(k.s), "theta": f(k.theta), "size": k.size,
        })).collect::<Vec<_>>(),
        "pass": c.passes(n),
    })
}

/// Report with the fixed key order `config, base, continuation, glue,
/// global, dynamics, critical_points, verdict`.
pub fn report_json(cfg: &Config, run: &VerificationRun) -> Value {
    let mut config = serde_json::to_value(cfg).expect("config serializes");
    normalize_numbers(&mut config);
    let mut root = Map::new();
    root.insert("config".into(), config);
    root.insert("base".into(), run.base.as_ref().map_or(Value::Null, base_json));
    root.insert("continuation".into(), run.trace.as_ref().map_or(Value::Null, continuation_json));
    let glue_v = match (&run.glued, &run.trace, &run.base) {
        (Some(g), Some(t), Some(b)) => glue_json(g, t, &b.field),
        _ => Value::Null,
    };
    root.insert("glue".into(), glue_v);
    root.insert("global".into(), run.glued.as_ref().map_or(Value::Null, |g| global_json(g, run.global_eigen.as_ref())));
    root.insert("dynamics".into(), run.probe.as_ref().map_or(Value::Null, |p| dynamics_json(p, cfg.dynamics.delta)));
    let crit = match (&run.critical, &run.glued) {
        (Some(c), Some(g)) => critical_json(c, g.n, cfg.critical.tol_rel),
        _ => Value::Null,
    };
    root.insert("critical_points".into(), crit);
    let mut checks = Map::new();
    for (name, ok) in run.checks() {
        checks.insert(name.into(), Value::Bool(ok));
    }
    let (stage, error) = match &run.failure {
        Some((s, e)) => (Value::String(s.clone()), Value::String(e.to_string())),
        None => (Value::Null, Value::Null),
    };
    root.insert(
        "verdict".into(),
        json!({
            "pass": run.passed(),
            "failed_stage": stage,
            "error": error,
            "checks": Value::Object(checks),
        }),
    );
    Value::Object(root)
}
