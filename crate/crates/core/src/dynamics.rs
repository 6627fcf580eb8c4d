//! Time stepping of `∂_t u = Δu + f(u)` and Lyapunov stability probes.
//!
//! Steps are IMEX Euler with implicit diffusion. The stiff negative part of
//! `f'` (large near the ends of the pattern range) is treated with a
//! nodewise linear stabilizer `c`, giving
//!
//! ```text
//!   (M − dt L̂ + dt M C) u' = M (u + dt (f(u) + C u)).
//! ```
//!
//! The matrix is an SPD M-matrix and the right-hand side is monotone in `u`
//! while `f' + c ≥ 0`, so the step map preserves nodewise order.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField};
use crate::io::fmt_f64;
use crate::linalg::BandedCholesky;
use crate::nonlinearity::Nonlinearity;
use crate::operator::DiscreteOperator;

pub const MAX_DT: f64 = 1e-2;
/// Number of recorded samples per trajectory (plus the initial one).
pub const SAMPLES: usize = 100;

/// Deviations `‖u(t_k) − U‖_∞` at the recorded times.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub deviations: Vec<f64>,
    pub snapshots: Vec<ScalarField>,
    /// Largest deviation over every step, recorded or not.
    pub peak_deviation: f64,
}

impl Trajectory {
    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().fold(self.peak_deviation, |m, v| m.max(*v))
    }

    pub fn final_deviation(&self) -> f64 {
        self.deviations.last().copied().unwrap_or(0.0)
    }

    /// CSV with header `t,sup_dev`.
    pub fn write_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "t,sup_dev")?;
        for (t, d) in self.times.iter().zip(&self.deviations) {
            writeln!(w, "{},{}", fmt_f64(*t), fmt_f64(*d))?;
        }
        Ok(())
    }
}

/// Nodewise `c_i = max(0, −min f')` over `[U_i − w, U_i + w]`.
pub fn stabilizer(nl: &Nonlinearity, reference: &ScalarField, window: f64) -> Vec<f64> {
    reference.values().iter().map(|&u| (-nl.fprime_bounds(u - window, u + window).0).max(0.0)).collect()
}

/// `min(1e-2, 0.5 / max f'⁺)` over the range of `reference` widened by `window`.
pub fn default_dt(nl: &Nonlinearity, reference: &ScalarField, window: f64) -> f64 {
    let (lo, hi) = reference.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let lip = nl.fprime_bounds(lo - window, hi + window).1.max(0.0);
    if lip == 0.0 {
        MAX_DT
    } else {
        MAX_DT.min(0.5 / lip)
    }
}

/// One stepping scheme bound to an operator, nonlinearity and step size.
pub struct Stepper<'a> {
    op: &'a DiscreteOperator,
    nl: &'a Nonlinearity,
    dt: f64,
    c: Vec<f64>,
    factor: BandedCholesky,
    order: Vec<usize>,
}

impl<'a> Stepper<'a> {
    pub fn new(op: &'a DiscreteOperator, nl: &'a Nonlinearity, dt: f64, c: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if c.len() != op.grid().len() {
            return Err(Error::GridMismatch("stabilizer length".into()));
        }
        // the step matrix is constant: factor it once
        let shifted: Vec<f64> = op.mass().iter().zip(&c).map(|(m, c)| m * (1.0 + dt * c)).collect();
        let (a, order) = op.banded_symmetric(-dt, &shifted);
        let factor = a.cholesky()?;
        Ok(Self { op, nl, dt, c, factor, order })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `u` by one step; `step` only labels errors.
    pub fn step(&self, u: &mut [f64], step: usize) -> Result<()> {
        let (mass, dt) = (self.op.mass(), self.dt);
        let mut b = vec![0.0; u.len()];
        for k in 0..u.len() {
            b[self.order[k]] = mass[k] * (u[k] + dt * (self.nl.eval_f(u[k]) + self.c[k] * u[k]));
        }
        self.factor.solve_in_place(&mut b);
        for k in 0..u.len() {
            u[k] = b[self.order[k]];
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(step));
        }
        Ok(())
    }
}

/// Steps taken between recorded samples for horizon `t_end`.
pub fn record_every(t_end: f64, dt: f64) -> usize {
    ((t_end / (SAMPLES as f64 * dt)).floor() as usize).max(1)
}

fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end >= dt) {
        return Err(Error::InvalidArgument(format!("T = {t_end} must be at least dt = {dt}")));
    }
    Ok((t_end / dt).round() as usize)
}

/// Integrates from `u0` to `t_end`, recording `‖u − reference‖_∞`.
pub fn integrate(
    stepper: &Stepper,
    u0: &ScalarField,
    reference: &ScalarField,
    t_end: f64,
    keep_snapshots: bool,
) -> Result<Trajectory> {
    stepper.op.check_field(u0)?;
    stepper.op.check_field(reference)?;
    let dt = stepper.dt;
    let steps = step_count(t_end, dt)?;
    let every = record_every(t_end, dt);
    let mut u = u0.values().to_vec();
    let mut traj = Trajectory::default();
    let grid = *u0.grid();
    let record = |k: usize, u: &[f64], traj: &mut Trajectory| -> Result<()> {
        traj.times.push(k as f64 * dt);
        traj.deviations.push(u.iter().zip(reference.values()).fold(0.0, |m, (a, b)| m.max((a - b).abs())));
        if keep_snapshots {
            traj.snapshots.push(ScalarField::new(grid, u.to_vec())?);
        }
        Ok(())
    };
    record(0, &u, &mut traj)?;
    traj.peak_deviation = traj.deviations[0];
    for k in 1..=steps {
        stepper.step(&mut u, k)?;
        if k % every == 0 || k == steps {
            record(k, &u, &mut traj)?;
        } else {
            let d = u.iter().zip(reference.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            traj.peak_deviation = traj.peak_deviation.max(d);
        }
    }
    traj.peak_deviation = traj.max_deviation();
    Ok(traj)
}

/// Smooth field with `‖η‖_∞ = 1` at the nodes: a truncated Fourier series
/// with at most `modes` terms per direction and decaying random amplitudes.
pub fn random_smooth_field(grid: &Grid2D, rng: &mut impl Rng, modes: usize) -> ScalarField {
    let modes = modes.clamp(1, 8);
    let ext = grid.extent();
    let mt = if grid.ntheta() == 1 { 1 } else { modes };
    let mut coef = Vec::new();
    for a in 0..modes {
        for b in 0..mt {
            let w = 1.0 / (1.0 + (a * a + b * b) as f64);
            coef.push((a, b, w * (2.0 * rng.gen::<f64>() - 1.0), w * (2.0 * rng.gen::<f64>() - 1.0), w * (2.0 * rng.gen::<f64>() - 1.0)));
        }
    }
    let periodic = grid.is_periodic();
    let raw = ScalarField::from_fn(*grid, |s, t| {
        coef.iter()
            .map(|&(a, b, x, y, z)| {
                let (sa, ca) = if periodic {
                    (2.0 * PI * a as f64 * s / ext).sin_cos()
                } else {
                    (0.0, (PI * a as f64 * s / ext).cos())
                };
                let sp = x * ca + if periodic { z * sa } else { 0.0 };
                sp * (y * (b as f64 * t).cos() + z * (b as f64 * t).sin())
            })
            .sum()
    });
    let m = raw.sup_norm();
    if m == 0.0 {
        ScalarField::constant(*grid, 1.0)
    } else {
        raw.map(|v| v / m)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub delta: f64,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub random_trials: usize,
    pub seed: u64,
    pub parallel: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialSummary {
    pub label: String,
    pub max_deviation: f64,
    pub final_deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub delta: f64,
    pub t_end: f64,
    pub dt: f64,
    pub trials: Vec<TrialSummary>,
    /// Largest nodewise violation of `u⁻ ≤ u ≤ u⁺` over recorded steps.
    pub sandwich_violation: f64,
    pub sandwich_holds: bool,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Absolute slack in the order check, covering the linear-solver tolerance.
pub fn sandwich_tolerance(reference: &ScalarField) -> f64 {
    1e-9 * reference.sup_norm().max(1.0)
}

/// Runs `U ± δ` and seeded random trials `U + δη` in lockstep.
///
/// A trial passes if `max_k d_k ≤ 2δ` and `d_final ≤ δ/10`; the random
/// trials are also checked to stay between the `U − δ` and `U + δ` runs.
/// Both checks look at every step.
pub fn stability_probe(op: &DiscreteOperator, nl: &Nonlinearity, reference: &ScalarField, settings: &ProbeSettings) -> Result<ProbeReport> {
    let delta = settings.delta;
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    op.check_field(reference)?;
    let window = 2.0 * delta;
    let dt = settings.dt.unwrap_or_else(|| default_dt(nl, reference, window));
    let stepper = Stepper::new(op, nl, dt, stabilizer(nl, reference, window))?;
    let steps = step_count(settings.t_end, dt)?;

    let grid = *reference.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut labels = vec!["plus".to_string(), "minus".to_string()];
    let mut states = vec![reference.map(|v| v + delta).into_values(), reference.map(|v| v - delta).into_values()];
    for t in 0..settings.random_trials {
        let eta = random_smooth_field(&grid, &mut rng, 8);
        labels.push(format!("random{t}"));
        states.push(reference.combine(1.0, &eta, delta)?.into_values());
    }
    let ntr = states.len();
    let mut max_dev = vec![0.0f64; ntr];
    let mut last_dev = vec![0.0f64; ntr];
    let mut violation = 0.0f64;
    let observe = |states: &[Vec<f64>], max_dev: &mut [f64], last_dev: &mut [f64], violation: &mut f64| {
        for (t, u) in states.iter().enumerate() {
            let d = u.iter().zip(reference.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            max_dev[t] = max_dev[t].max(d);
            last_dev[t] = d;
        }
        for u in &states[2..] {
            for k in 0..u.len() {
                *violation = violation.max(states[1][k] - u[k]).max(u[k] - states[0][k]);
            }
        }
    };
    observe(&states, &mut max_dev, &mut last_dev, &mut violation);
    for k in 1..=steps {
        if settings.parallel && ntr > 1 {
            let results: Vec<Result<()>> = std::thread::scope(|scope| {
                let handles: Vec<_> = states.iter_mut().map(|u| scope.spawn(|| stepper.step(u, k))).collect();
                handles.into_iter().map(|h| h.join().expect("stepping thread panicked")).collect()
            });
            results.into_iter().collect::<Result<Vec<()>>>()?;
        } else {
            for u in states.iter_mut() {
                stepper.step(u, k)?;
            }
        }
        observe(&states, &mut max_dev, &mut last_dev, &mut violation);
    }
    let trials: Vec<TrialSummary> = labels
        .into_iter()
        .enumerate()
        .map(|(t, label)| TrialSummary {
            label,
            max_deviation: max_dev[t],
            final_deviation: last_dev[t],
            pass: max_dev[t] <= 2.0 * delta && last_dev[t] <= delta / 10.0,
        })
        .collect();
    let sandwich_holds = violation <= sandwich_tolerance(reference);
    let pass = trials.iter().all(|t| t.pass) && sandwich_holds;
    Ok(ProbeReport {
        delta,
        t_end: settings.t_end,
        dt,
        max_deviation: max_dev.iter().fold(0.0, |m, v| m.max(*v)),
        trials,
        sandwich_violation: violation.max(0.0),
        sandwich_holds,
        pass,
    })
}

/// Exponential decay rate of `d_k` over its first decade (least squares on
/// `ln d` from the first sample until `d` has dropped tenfold).
pub fn decay_rate(traj: &Trajectory) -> Option<f64> {
    let d0 = *traj.deviations.first()?;
    let end = traj.deviations.iter().position(|&d| d <= d0 / 10.0)?;
    let pts: Vec<(f64, f64)> = (0..=end).map(|k| (traj.times[k], traj.deviations[k].ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t / n, b + y / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + (t - mt) * (y - my), b + (t - mt).powi(2)));
    Some(-sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{glue, ProfileCurve};
    use crate::nonlinearity::{make_pattern_profile, synthesize_f, SynthesisMode};
    use crate::operator::assemble;

    fn base(ns: usize, nt: usize) -> (DiscreteOperator, Nonlinearity, ScalarField) {
        let p = ProfileCurve::cosine(1.0, 0.5, 1.0).unwrap();
        let g = Grid2D::neumann(ns, nt, 1.0).unwrap();
        let u = make_pattern_profile(1.0, 1.0, 2).unwrap();
        let nl = synthesize_f(&p, &u, SynthesisMode::DiscreteExact, Some(&g)).unwrap();
        (assemble(&p, &g).unwrap(), nl, u.sample(&g))
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let (op, nl, ug) = base(32, 8);
        let st = Stepper::new(&op, &nl, 1e-2, stabilizer(&nl, &ug, 0.0)).unwrap();
        let tr = integrate(&st, &ug, &ug, 1.0, false).unwrap();
        assert!(tr.max_deviation() <= 1e-10);
        assert_eq!(tr.times.len(), SAMPLES + 1);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn peak_deviation_sees_every_step() {
        let (op, nl, ug) = base(32, 8);
        let delta = 1e-2 * ug.sup_norm();
        let dt = default_dt(&nl, &ug, 2.0 * delta);
        let st = Stepper::new(&op, &nl, dt, stabilizer(&nl, &ug, 2.0 * delta)).unwrap();
        let u0 = ug.map(|v| v + delta);
        let t_end = 1000.0 * dt;
        let tr = integrate(&st, &u0, &ug, t_end, false).unwrap();
        let mut u = u0.values().to_vec();
        let mut peak = delta;
        for k in 1..=1000 {
            st.step(&mut u, k).unwrap();
            peak = peak.max(u.iter().zip(ug.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())));
        }
        assert_eq!(record_every(t_end, dt), 10);
        assert_eq!(tr.max_deviation(), peak);
    }

    #[test]
    fn heat_flow_conserves_mass_and_relaxes_to_mean() {
        let p = ProfileCurve::cosine(1.0, 0.5, 1.0).unwrap();
        let g = Grid2D::neumann(24, 8, 1.0).unwrap();
        let op = assemble(&p, &g).unwrap();
        let nl = Nonlinearity::affine(0.0, 0.0);
        let u0 = ScalarField::from_fn(g, |s, t| (3.0 * s).sin() + 0.3 * t.cos());
        let st = Stepper::new(&op, &nl, 1e-2, vec![0.0; g.len()]).unwrap();
        let total = |u: &[f64]| u.iter().zip(op.mass()).map(|(v, m)| v * m).sum::<f64>();
        let mean = total(u0.values()) / op.total_area();
        let mut u = u0.values().to_vec();
        let mut prev_dev = f64::INFINITY;
        for k in 1..=3000 {
            let before = total(&u);
            st.step(&mut u, k).unwrap();
            assert!((total(&u) - before).abs() < 1e-10);
            let dev = u.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
            assert!(dev <= prev_dev + 1e-14);
            prev_dev = dev;
        }
        assert!(prev_dev < 1e-3);
    }

    #[test]
    fn comparison_principle_orders_trajectories() {
        let (op, nl, ug) = base(32, 8);
        let delta = 2e-3;
        let st = Stepper::new(&op, &nl, default_dt(&nl, &ug, 2.0 * delta), stabilizer(&nl, &ug, 2.0 * delta)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eta = random_smooth_field(op.grid(), &mut rng, 8);
        let mut lo = ug.map(|v| v - delta).into_values();
        let mut mid = ug.combine(1.0, &eta, delta).unwrap().into_values();
        let mut hi = ug.map(|v| v + delta).into_values();
        for k in 1..=200 {
            st.step(&mut lo, k).unwrap();
            st.step(&mut mid, k).unwrap();
            st.step(&mut hi, k).unwrap();
            for i in 0..lo.len() {
                assert!(lo[i] <= mid[i] + 1e-12 && mid[i] <= hi[i] + 1e-12, "step {k} node {i}");
            }
        }
    }

    #[test]
    fn reflection_symmetry_is_preserved() {
        let p = ProfileCurve::cosine(1.0, 0.5, 1.0).unwrap();
        let g = glue(&p, 6, None).unwrap();
        let grid = Grid2D::periodic(12 * 16, 8, g.period()).unwrap();
        let op = assemble(&g, &grid).unwrap();
        let nl = Nonlinearity::from_table(vec![-1.0, 0.0, 1.0], vec![1.0, 0.0, -1.0]).unwrap();
        // even about s = 0 and about every junction s = m·l
        let u0 = ScalarField::from_fn(grid, |s, t| (2.0 * PI * s).cos() * 0.4 + 0.1 * t.cos());
        let st = Stepper::new(&op, &nl, 1e-2, vec![0.0; grid.len()]).unwrap();
        let mut u = u0.into_values();
        let ns = grid.ns();
        let per = ns / 12; // cells per piece
        for k in 1..=50 {
            st.step(&mut u, k).unwrap();
            for i in 0..ns {
                let mirror = (2 * per * ns - 1 - i) % ns; // reflection about s = 0 on the cell-centered grid
                for j in 0..8 {
                    assert!((u[grid.index(i, j)] - u[grid.index(mirror, j)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn random_fields_are_normalized_and_reproducible() {
        let g = Grid2D::periodic(32, 16, 4.0).unwrap();
        let a = random_smooth_field(&g, &mut ChaCha8Rng::seed_from_u64(5), 8);
        let b = random_smooth_field(&g, &mut ChaCha8Rng::seed_from_u64(5), 8);
        assert_eq!(a, b);
        assert!((a.sup_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trajectory_csv_header() {
        let tr = Trajectory { times: vec![0.0, 1.0], deviations: vec![1.0, 0.5], snapshots: vec![], peak_deviation: 0.0 };
        let mut out = Vec::new();
        tr.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("t,sup_dev\n"));
    }

    #[test]
    fn decay_rate_of_exact_exponential() {
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let deviations = times.iter().map(|t| (-2.0 * t).exp()).collect();
        let tr = Trajectory { times, deviations, snapshots: vec![], peak_deviation: 0.0 };
        assert!((decay_rate(&tr).unwrap() - 2.0).abs() < 1e-12);
    }
}
