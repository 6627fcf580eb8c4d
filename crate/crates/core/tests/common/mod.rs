//! Helpers shared by the integration tests: a dense eigen oracle, closed-form
//! Laplacians and the shipped configuration.
#![allow(dead_code)]

use std::path::PathBuf;

use rdsurf_core::{parse_config, Config, DiscreteOperator, ScalarField};

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn shipped_config() -> Config {
    let text = std::fs::read_to_string(workspace_root().join("default.cfg")).expect("default.cfg is shipped");
    parse_config(&text).expect("default.cfg parses")
}

/// `M^{-1/2} (−L̂ − M·F) M^{-1/2}` as a dense symmetric matrix.
pub fn dense_pencil(op: &DiscreteOperator, potential: &ScalarField) -> Vec<Vec<f64>> {
    let n = op.grid().len();
    let m = op.mass();
    let mut a = vec![vec![0.0; n]; n];
    for (i, j, v) in op.triplets() {
        a[i][j] -= v / (m[i] * m[j]).sqrt();
    }
    for (k, f) in potential.values().iter().enumerate() {
        a[k][k] -= f;
    }
    a
}

/// All eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations,
/// ascending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Laplacian of `cos θ` on the bent tube with constant radius `a` and
/// curvature `κ`, where `Φ = 1 − κ a cos θ`.
pub fn torus_laplacian_cos(a: f64, kappa: f64, theta: f64) -> f64 {
    let phi = 1.0 - kappa * a * theta.cos();
    -theta.cos() / (a * a) - kappa * theta.sin().powi(2) / (a * phi)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
