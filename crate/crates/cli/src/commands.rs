use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use rdsurf_core::config::{Format, GlueCount};
use rdsurf_core::continuation::continue_in_kappa;
use rdsurf_core::io::{json_f64, write_field_csv, write_obj};
use rdsurf_core::pipeline::{
    base_json, build_base_pattern, build_glued_pattern, build_profile, continuation_json, report_json, resolve_n, run_verification,
    solve_settings, BasePattern,
};
use rdsurf_core::{glue as glue_surface, parse_config, serialize_config, BentTube, Config, Error, GluedSurface, Grid2D, ScalarField};

use crate::Common;

/// Bad invocation or unreadable input; exits with status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config { .. }
            | Error::Parse(_)
            | Error::InvalidArgument(_)
            | Error::SelfIntersecting(_)
            | Error::NonMonotoneArc { .. }
            | Error::ArclengthViolated { .. }
    )
}

/// 2 for usage and configuration errors, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<Error>() {
        Some(core) if is_config_error(core) => 2,
        _ => 1,
    }
}

fn load_config(common: &Common) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => Config::default(),
    };
    if let Some(out) = &common.out {
        cfg.output.directory = out.display().to_string();
    }
    Ok(cfg)
}

fn out_dir(cfg: &Config) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.output.directory);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, v)?;
        writeln!(w)
    })
}

fn wants(cfg: &Config, f: Format) -> bool {
    cfg.output.formats.contains(&f)
}

pub fn synth(common: &Common) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let base = build_base_pattern(&cfg)?;
    let dir = out_dir(&cfg)?;
    if wants(&cfg, Format::Csv) {
        write_file(&dir.join("base_pattern.csv"), |w| write_field_csv(&base.field, w))?;
        write_file(&dir.join("nonlinearity.csv"), |w| base.nonlinearity.write_csv(w))?;
    }
    if wants(&cfg, Format::Json) {
        write_json(&dir.join("base.json"), &base_json(&base))?;
    }
    if wants(&cfg, Format::Obj) {
        let tube = BentTube::new(base.profile.clone(), 0.0)?;
        write_file(&dir.join("base_pattern.obj"), |w| write_obj(&base.field, |s, t| tube.embed(s, t), w))?;
    }
    eprintln!("base pattern: lambda1 = {:.6e}, residual = {:.3e}", base.eigen.lambda1, base.residual);
    Ok(ExitCode::SUCCESS)
}

pub fn continuation(common: &Common) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let base = build_base_pattern(&cfg)?;
    let trace = continue_in_kappa(&base.profile, &base.nonlinearity, &base.field, cfg.continuation.kappa_target, cfg.continuation.steps, &solve_settings(&cfg))?;
    let dir = out_dir(&cfg)?;
    write_file(&dir.join("continuation.csv"), |w| trace.write_csv(w))?;
    if wants(&cfg, Format::Json) {
        write_json(&dir.join("continuation.json"), &continuation_json(&trace))?;
    }
    eprintln!("kappa0 = {:.6e} ({} steps, {} halvings)", trace.kappa0(), trace.steps.len(), trace.halvings);
    Ok(ExitCode::SUCCESS)
}

/// The configuration that reproduces a glued surface: the member actually
/// used and the resolved `n`.
fn run_config(cfg: &Config, base: &BasePattern, n: usize) -> Config {
    let mut run = cfg.clone();
    run.profile.amplitude = base.amplitude;
    run.pattern.p = base.pattern.exponent();
    run.pattern.beta = base.pattern.beta();
    run.glue.n = GlueCount::Fixed(n);
    run
}

fn store_global(cfg: &Config, dir: &Path, surface: &GluedSurface, field: &ScalarField, run: &Config) -> Result<()> {
    write_file(&dir.join("run.cfg"), |w| w.write_all(serialize_config(run).as_bytes()))?;
    write_file(&dir.join("global_field.csv"), |w| write_field_csv(field, w))?;
    if wants(cfg, Format::Obj) {
        write_file(&dir.join("glued.obj"), |w| write_obj(field, |s, t| surface.embed(s, t), w))?;
    }
    Ok(())
}

pub fn glue(common: &Common, n: Option<usize>) -> Result<ExitCode> {
    let mut cfg = load_config(common)?;
    if let Some(n) = n {
        if n < 2 {
            return Err(usage("n ≥ 2 required"));
        }
        cfg.glue.n = GlueCount::Fixed(n);
    }
    let base = build_base_pattern(&cfg)?;
    if let GlueCount::Fixed(n) = cfg.glue.n {
        glue_surface(&base.profile, n, None)?;
    }
    let settings = solve_settings(&cfg);
    let trace = continue_in_kappa(&base.profile, &base.nonlinearity, &base.field, cfg.continuation.kappa_target, cfg.continuation.steps, &settings)?;
    let n = resolve_n(&cfg, &base.profile, trace.kappa0())?;
    let glued = build_glued_pattern(&base, &trace, n, &settings)?;
    let dir = out_dir(&cfg)?;
    cfg.output.formats.push(Format::Obj);
    store_global(&cfg, &dir, &glued.surface, &glued.field, &run_config(&cfg, &base, n))?;
    eprintln!("n = {n}, kappa = {:.6e}, global residual = {:.3e}", glued.surface.kappa(), glued.residual);
    Ok(ExitCode::SUCCESS)
}

pub fn verify(common: &Common) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let run = run_verification(&cfg);
    let report = report_json(&cfg, &run);
    let dir = out_dir(&cfg)?;
    write_json(&dir.join("report.json"), &report)?;
    if let (Some(g), Some(b)) = (&run.glued, &run.base) {
        store_global(&cfg, &dir, &g.surface, &g.field, &run_config(&cfg, b, g.n))?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some((stage, e)) = &run.failure {
        eprintln!("stage {stage} failed: {e}");
        if is_config_error(e) {
            return Ok(ExitCode::from(2));
        }
    }
    let pass = run.passed();
    eprintln!("verdict: {}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

/// Reads a field written by [`write_field_csv`] onto `grid`.
fn read_field_csv(path: &Path, grid: Grid2D) -> Result<ScalarField> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some("s,theta,u") {
        return Err(usage(format!("{}: expected header s,theta,u", path.display())));
    }
    let mut values = Vec::with_capacity(grid.len());
    for (k, line) in lines.enumerate() {
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| usage(format!("{}:{}: bad number", path.display(), k + 2)))?;
        if cols.len() != 3 || k >= grid.len() {
            return Err(usage(format!("{}:{}: does not match a {}x{} grid", path.display(), k + 2, grid.ns(), grid.ntheta())));
        }
        let (i, j) = grid.coords(k);
        if (cols[0] - grid.s(i)).abs() > 1e-12 * grid.extent() || (cols[1] - grid.theta(j)).abs() > 1e-12 {
            return Err(usage(format!("{}:{}: node does not match the stored configuration", path.display(), k + 2)));
        }
        values.push(cols[2]);
    }
    if values.len() != grid.len() {
        bail!(usage(format!("{}: {} rows, expected {}", path.display(), values.len(), grid.len())));
    }
    Ok(ScalarField::new(grid, values)?)
}

pub fn export(from: &Path, out: Option<&Path>, formats: &[String]) -> Result<ExitCode> {
    let formats: Vec<Format> = formats.iter().map(|f| Format::parse(f).ok_or_else(|| usage(format!("unknown format '{f}'")))).collect::<Result<_>>()?;
    let cfg_path = from.join("run.cfg");
    let text = fs::read_to_string(&cfg_path).map_err(|e| usage(format!("cannot read {}: {e}", cfg_path.display())))?;
    let cfg = parse_config(&text).map_err(|e| usage(format!("{}: {e}", cfg_path.display())))?;
    let GlueCount::Fixed(n) = cfg.glue.n else {
        return Err(usage(format!("{}: glue.n must be fixed", cfg_path.display())));
    };
    let profile = build_profile(&cfg, cfg.profile.amplitude)?;
    let surface = glue_surface(&profile, n, None)?;
    let grid = Grid2D::periodic(2 * n * cfg.grid.ns, cfg.grid.ntheta, surface.period())?;
    let field = read_field_csv(&from.join("global_field.csv"), grid)?;
    let dir = out.unwrap_or(from);
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for f in formats {
        match f {
            Format::Obj => write_file(&dir.join("glued.obj"), |w| write_obj(&field, |s, t| surface.embed(s, t), w))?,
            Format::Csv => write_file(&dir.join("global_field.csv"), |w| write_field_csv(&field, w))?,
            Format::Json => write_json(
                &dir.join("global_field.json"),
                &json!({
                    "n": n,
                    "kappa": json_f64(surface.kappa()),
                    "grid": { "Ns": grid.ns(), "Ntheta": grid.ntheta(), "period": json_f64(surface.period()) },
                    "values": field.values().iter().map(|&v| json_f64(v)).collect::<Vec<_>>(),
                }),
            )?,
        }
    }
    Ok(ExitCode::SUCCESS)
}
