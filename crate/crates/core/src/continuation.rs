//! Continuation of a pattern from the straight tube (`κ = 0`) to bent tubes.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::geometry::{BentTube, ProfileCurve};
use crate::grid::{Grid2D, ScalarField};
use crate::io::fmt_f64;
use crate::nonlinearity::Nonlinearity;
use crate::operator::{assemble, DiscreteOperator};
use crate::solvers::{newton_solve, principal_eigenpair_seeded, EigenPair, NewtonResult};

pub const DEFAULT_STEPS: usize = 16;
pub const MAX_HALVINGS: usize = 3;

#[derive(Debug, Clone, Copy)]
pub struct SolveSettings {
    pub newton_tol: f64,
    pub max_newton: usize,
    pub eigen_tol: f64,
    pub seed: u64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self { newton_tol: 1e-11, max_newton: 30, eigen_tol: 1e-10, seed: 0 }
    }
}

/// Solution on one bent tube together with its linear stability.
#[derive(Debug, Clone)]
pub struct KappaSolution {
    pub kappa: f64,
    pub operator: DiscreteOperator,
    pub newton: NewtonResult,
    pub eigen: EigenPair,
}

/// Newton solve and principal eigenpair on `BentTube(p, κ)` from `init`.
pub fn solve_at_kappa(p: &ProfileCurve, nl: &Nonlinearity, grid: &Grid2D, kappa: f64, init: &ScalarField, settings: &SolveSettings) -> Result<KappaSolution> {
    let tube = BentTube::new(p.clone(), kappa)?;
    let operator = assemble(&tube, grid)?;
    let newton = newton_solve(&operator, nl, init, settings.newton_tol, settings.max_newton)?;
    let potential = nl.potential(&newton.solution);
    let eigen = principal_eigenpair_seeded(&operator, &potential, settings.eigen_tol, settings.seed, 3)?;
    Ok(KappaSolution { kappa, operator, newton, eigen })
}

#[derive(Debug, Clone)]
pub struct ContinuationStep {
    pub kappa: f64,
    pub solution: ScalarField,
    pub residual: f64,
    pub lambda1: f64,
    /// `‖U_κ − U_g‖_∞`
    pub sup_gap: f64,
    pub theta_variation: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ContinuationTrace {
    pub target: f64,
    pub steps: Vec<ContinuationStep>,
    pub halvings: usize,
    /// Why the trace stopped short of the target, if it did.
    pub stop_reason: Option<String>,
}

impl ContinuationTrace {
    /// Largest accepted curvature. Resolution dependent: it certifies only
    /// the grid it was computed on.
    pub fn kappa0(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.kappa)
    }

    pub fn reached_target(&self) -> bool {
        self.stop_reason.is_none()
    }

    /// Accepted step with curvature closest to `kappa`.
    pub fn nearest(&self, kappa: f64) -> &ContinuationStep {
        self.steps
            .iter()
            .min_by(|a, b| (a.kappa - kappa).abs().total_cmp(&(b.kappa - kappa).abs()))
            .expect("trace always holds the base step")
    }

    /// CSV with header `kappa,residual,lambda1,sup_gap`.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "kappa,residual,lambda1,sup_gap")?;
        for s in &self.steps {
            writeln!(w, "{},{},{},{}", fmt_f64(s.kappa), fmt_f64(s.residual), fmt_f64(s.lambda1), fmt_f64(s.sup_gap))?;
        }
        Ok(())
    }
}

fn record(sol: &KappaSolution, ug: &ScalarField) -> Result<ContinuationStep> {
    Ok(ContinuationStep {
        kappa: sol.kappa,
        sup_gap: sol.newton.solution.sup_distance(ug)?,
        theta_variation: sol.newton.solution.theta_variation(),
        residual: sol.newton.residual,
        lambda1: sol.eigen.lambda1,
        newton_iterations: sol.newton.iterations,
        solution: sol.newton.solution.clone(),
    })
}

/// Tracks `U_κ` for `κ = κ_target·j/steps`, warm-starting each Newton solve
/// from the previous step.
///
/// A step that fails (Newton failure or `λ₁ ≤ 0`) is retried with half the
/// increment, at most [`MAX_HALVINGS`] times over the whole trace; after that
/// the trace stops and the last accepted curvature is the verified bound.
pub fn continue_in_kappa(
    p: &ProfileCurve,
    nl: &Nonlinearity,
    ug: &ScalarField,
    kappa_target: f64,
    steps: usize,
    settings: &SolveSettings,
) -> Result<ContinuationTrace> {
    if steps == 0 {
        return Err(Error::InvalidArgument("continuation needs at least one step".into()));
    }
    if !(kappa_target.abs() * p.max_psi() < 1.0) {
        return Err(Error::SelfIntersecting(kappa_target.abs() * p.max_psi()));
    }
    let grid = *ug.grid();
    let base = solve_at_kappa(p, nl, &grid, 0.0, ug, settings)?;
    let mut trace = ContinuationTrace { target: kappa_target, steps: vec![record(&base, ug)?], halvings: 0, stop_reason: None };
    if kappa_target == 0.0 {
        return Ok(trace);
    }
    let mut increment = kappa_target / steps as f64;
    let mut current = base.newton.solution;
    let mut kappa = 0.0f64;
    while (kappa_target - kappa) * kappa_target.signum() > 1e-15 * kappa_target.abs() {
        let next = if ((kappa + increment) - kappa_target) * kappa_target.signum() > 0.0 { kappa_target } else { kappa + increment };
        let outcome = solve_at_kappa(p, nl, &grid, next, &current, settings).and_then(|sol| {
            if sol.eigen.lambda1 > 0.0 {
                Ok(sol)
            } else {
                Err(Error::Domain(format!("lambda1 = {} <= 0 at kappa = {next}", sol.eigen.lambda1)))
            }
        });
        match outcome {
            Ok(sol) => {
                trace.steps.push(record(&sol, ug)?);
                current = sol.newton.solution;
                kappa = next;
            }
            Err(_) if trace.halvings < MAX_HALVINGS => {
                trace.halvings += 1;
                increment /= 2.0;
            }
            Err(e) => {
                if trace.steps.len() == 1 {
                    return Err(Error::NoContinuationNeighborhood);
                }
                trace.stop_reason = Some(format!("stopped at kappa = {next}: {e}"));
                break;
            }
        }
    }
    Ok(trace)
}
