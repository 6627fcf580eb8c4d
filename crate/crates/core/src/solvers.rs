//! Newton's method for `Δu + f(u) = 0` and the principal eigenpair of the
//! linearization `−(Δ + f'(U))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::linalg::{dot, BandedCholesky};
use crate::nonlinearity::Nonlinearity;
use crate::operator::DiscreteOperator;

pub const EIGEN_MAX_ITER: usize = 500;

/// Nodewise residual `M⁻¹ L̂ u + f(u)`.
pub fn residual(op: &DiscreteOperator, nl: &Nonlinearity, u: &ScalarField) -> Result<Vec<f64>> {
    op.check_field(u)?;
    let mut r = vec![0.0; u.values().len()];
    op.stiffness_apply(u.values(), &mut r);
    for ((r, m), v) in r.iter_mut().zip(op.mass()).zip(u.values()) {
        *r = *r / m + nl.eval_f(*v);
    }
    Ok(r)
}

pub fn residual_norm(op: &DiscreteOperator, nl: &Nonlinearity, u: &ScalarField) -> Result<f64> {
    Ok(residual(op, nl, u)?.iter().fold(0.0, |m, v| m.max(v.abs())))
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub solution: ScalarField,
    pub residual: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Solves `M⁻¹ L̂ U + f(U) = 0` from `init`.
///
/// Each step solves `(L̂ + M f'(U)) δ = −(L̂U + M f(U))` by banded LU. A
/// singular Jacobian is retried with growing diagonal shifts before a fold
/// is reported; steps that increase the residual are halved.
pub fn newton_solve(op: &DiscreteOperator, nl: &Nonlinearity, init: &ScalarField, tol: f64, max_iter: usize) -> Result<NewtonResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    op.check_field(init)?;
    let mass = op.mass();
    let n = mass.len();
    let mut u = init.values().to_vec();
    let field = |u: &[f64]| ScalarField::new(*op.grid(), u.to_vec());
    let mut r = residual(op, nl, &field(&u)?)?;
    let mut rn = sup(&r);
    let mut history = vec![rn];
    let mut iterations = 0;
    while rn > tol {
        if iterations == max_iter {
            return Err(Error::NewtonDiverged { iterations, history });
        }
        iterations += 1;
        let jd: Vec<f64> = u.iter().zip(mass).map(|(v, m)| m * nl.eval_fprime(*v)).collect();
        let mut delta: Vec<f64> = r.iter().zip(mass).map(|(r, m)| -r * m).collect();
        solve_jacobian(op, &jd, &mut delta)?;
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
            if trial.iter().all(|v| v.is_finite()) {
                let rt = residual(op, nl, &field(&trial)?)?;
                let rtn = sup(&rt);
                if rtn < rn || step < 1.0 / 256.0 {
                    u = trial;
                    r = rt;
                    rn = rtn;
                    break;
                }
            } else if step < 1.0 / 256.0 {
                return Err(Error::NonFinite(iterations));
            }
            step *= 0.5;
        }
        history.push(rn);
        if !rn.is_finite() {
            return Err(Error::NonFinite(iterations));
        }
        debug_assert_eq!(u.len(), n);
    }
    Ok(NewtonResult { solution: field(&u)?, residual: rn, iterations, history })
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `(L̂ + diag(jd)) x = b` in place, regularizing a singular matrix.
fn solve_jacobian(op: &DiscreteOperator, jd: &[f64], b: &mut [f64]) -> Result<()> {
    let scale = op.stiffness_diagonal().iter().zip(jd).fold(0.0f64, |m, (l, d)| m.max((l + d).abs()));
    let tiny = 1e-14 * scale;
    let mut shift = 0.0;
    for attempt in 0..4 {
        let d: Vec<f64> = jd.iter().map(|v| v - shift).collect();
        let (lu, order) = op.banded_general(1.0, &d);
        match lu.factor(tiny) {
            Ok(lu) => {
                let mut x = vec![0.0; b.len()];
                for (k, &p) in order.iter().enumerate() {
                    x[p] = b[k];
                }
                lu.solve_in_place(&mut x);
                for (k, &p) in order.iter().enumerate() {
                    b[k] = x[p];
                }
                return Ok(());
            }
            Err(Error::Singular(_)) => shift = scale * 1e-10 * 100f64.powi(attempt),
            Err(e) => return Err(e),
        }
    }
    Err(Error::FoldDetected)
}

/// Principal eigenpair of `(−L̂ − M F) φ = λ M φ`, `Σ φ² M = 1`, `φ > 0`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda1: f64,
    pub phi: ScalarField,
    pub residual: f64,
    pub iterations: usize,
}

/// `(⟨−L̂q, q⟩ − ⟨MFq, q⟩) / ⟨Mq, q⟩`.
pub fn rayleigh_quotient(op: &DiscreteOperator, potential: &ScalarField, q: &ScalarField) -> Result<f64> {
    op.check_field(potential)?;
    op.check_field(q)?;
    let num = pencil_energy(op, potential.values(), q.values());
    let den: f64 = q.values().iter().zip(op.mass()).map(|(v, m)| m * v * v).sum();
    if den == 0.0 {
        return Err(Error::Domain("Rayleigh quotient of the zero field".into()));
    }
    Ok(num / den)
}

fn pencil_energy(op: &DiscreteOperator, pot: &[f64], q: &[f64]) -> f64 {
    // ⟨−L̂q, q⟩ as a sum of face energies keeps it nonnegative in floating point
    let mut e = 0.0;
    op.for_each_face(|a, b, c| e += c * (q[b] - q[a]).powi(2));
    let m: f64 = q.iter().zip(pot).zip(op.mass()).map(|((v, f), w)| w * f * v * v).sum();
    e - m
}

/// `(−L̂ − M F) x`.
fn pencil_apply(op: &DiscreteOperator, pot: &[f64], x: &[f64], out: &mut [f64]) {
    op.stiffness_apply(x, out);
    for k in 0..x.len() {
        out[k] = -out[k] - op.mass()[k] * pot[k] * x[k];
    }
}

fn factor_shifted(op: &DiscreteOperator, pot: &[f64], sigma: f64) -> Result<(BandedCholesky, Vec<usize>)> {
    let d: Vec<f64> = pot.iter().zip(op.mass()).map(|(f, m)| -m * (f + sigma)).collect();
    let (a, order) = op.banded_symmetric(-1.0, &d);
    Ok((a.cholesky()?, order))
}

pub fn principal_eigenpair(op: &DiscreteOperator, potential: &ScalarField, tol: f64) -> Result<EigenPair> {
    let start = vec![1.0; op.grid().len()];
    principal_eigenpair_from(op, potential, tol, &start)
}

/// As [`principal_eigenpair`], restarting from seeded positive start vectors
/// if the converged vector is not of one sign.
pub fn principal_eigenpair_seeded(op: &DiscreteOperator, potential: &ScalarField, tol: f64, seed: u64, restarts: usize) -> Result<EigenPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = principal_eigenpair(op, potential, tol);
    for _ in 0..restarts {
        match last {
            Err(Error::NotPrincipal { .. }) => {
                let start: Vec<f64> = (0..op.grid().len()).map(|_| 1.0 + rng.gen::<f64>()).collect();
                last = principal_eigenpair_from(op, potential, tol, &start);
            }
            _ => break,
        }
    }
    last
}

/// Smallest eigenvalue of the pencil by inverse iteration.
///
/// The shift starts at `σ₀ = −max|F| − 1`, where `K − σ₀M` is positive
/// definite. It is then raised towards `λ₁`: a Cholesky factorization of
/// `K − σM` exists iff `σ < λ₁`, and every Rayleigh quotient is an upper
/// bound, so the bracket `[σ, ρ]` shrinks without ever passing `λ₁`.
pub fn principal_eigenpair_from(op: &DiscreteOperator, potential: &ScalarField, tol: f64, start: &[f64]) -> Result<EigenPair> {
    op.check_field(potential)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let pot = potential.values();
    let mass = op.mass();
    let n = pot.len();
    if start.len() != n {
        return Err(Error::GridMismatch("start vector length".into()));
    }
    let mut lo = -pot.iter().fold(0.0f64, |m, v| m.max(v.abs())) - 1.0;
    let mut phi = start.to_vec();
    normalize(&mut phi, mass);
    let mut hi = pencil_energy(op, pot, &phi);
    let (mut chol, mut order) = factor_shifted(op, pot, lo)?;
    let mut lambda = hi;
    let mut kphi = vec![0.0; n];
    let mut res = f64::INFINITY;
    let mut work = vec![0.0; n];
    let mut prev_change = f64::INFINITY;
    let mut since_shift = 0;
    for it in 1..=EIGEN_MAX_ITER {
        // x ← (K − σM)⁻¹ M φ
        for k in 0..n {
            work[order[k]] = mass[k] * phi[k];
        }
        chol.solve_in_place(&mut work);
        for k in 0..n {
            phi[k] = work[order[k]];
        }
        normalize(&mut phi, mass);
        let prev = lambda;
        lambda = pencil_energy(op, pot, &phi);
        pencil_apply(op, pot, &phi, &mut kphi);
        let mut rr = 0.0;
        let mut mm = 0.0;
        for k in 0..n {
            let m = mass[k] * phi[k];
            rr += (kphi[k] - lambda * m).powi(2);
            mm += m * m;
        }
        res = rr.sqrt() / mm.sqrt();
        let change = (lambda - prev).abs();
        if res <= tol && change <= tol * lambda.abs().max(1.0) {
            return finish(op, lambda, phi, res, it);
        }
        hi = hi.min(lambda);
        // the eigenvalue error contracts by ((λ₁−σ)/(λ₂−σ))² per step; raise
        // the shift when that ratio is poor
        let slow = change > 0.3 * prev_change;
        prev_change = change;
        since_shift += 1;
        if since_shift >= 2 && slow && hi - lo > tol {
            since_shift = 0;
            prev_change = f64::INFINITY;
            let mut c = lo + 0.9 * (hi - lo);
            for _ in 0..60 {
                match factor_shifted(op, pot, c) {
                    Ok((f, o)) => {
                        chol = f;
                        order = o;
                        lo = c;
                        break;
                    }
                    Err(Error::NotPositiveDefinite { .. }) => {
                        hi = c;
                        c = lo + 0.5 * (hi - lo);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Err(Error::EigenNotConverged { iterations: EIGEN_MAX_ITER, residual: res })
}

fn normalize(phi: &mut [f64], mass: &[f64]) {
    let sum: f64 = phi.iter().zip(mass).map(|(v, m)| v * m).sum();
    let nrm = phi.iter().zip(mass).map(|(v, m)| m * v * v).sum::<f64>().sqrt();
    let s = if sum < 0.0 { -1.0 / nrm } else { 1.0 / nrm };
    phi.iter_mut().for_each(|v| *v *= s);
}

fn finish(op: &DiscreteOperator, lambda1: f64, phi: Vec<f64>, residual: f64, iterations: usize) -> Result<EigenPair> {
    let negative = phi.iter().filter(|&&v| !(v > 0.0)).count();
    if negative > 0 {
        return Err(Error::NotPrincipal { negative });
    }
    debug_assert!((dot(&phi, &phi.iter().zip(op.mass()).map(|(v, m)| v * m).collect::<Vec<_>>()) - 1.0).abs() < 1e-10);
    Ok(EigenPair { lambda1, phi: ScalarField::new(*op.grid(), phi)?, residual, iterations })
}
