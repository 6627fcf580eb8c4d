//! Detection and clustering of critical points of a nodal field.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::operator::DiscreteOperator;

#[derive(Debug, Clone, Serialize)]
pub struct Cluster {
    /// Representative node: the one with the smallest `|∇U|`.
    pub s: f64,
    pub theta: f64,
    pub size: usize,
    #[serde(skip)]
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalReport {
    pub count: usize,
    pub clusters: Vec<Cluster>,
}

impl CriticalReport {
    /// Index of the cluster containing any of `nodes`.
    pub fn cluster_of(&self, nodes: &[usize]) -> Option<usize> {
        self.clusters.iter().position(|c| nodes.iter().any(|n| c.nodes.contains(n)))
    }
}

/// Marks node `k` critical when each gradient component, scaled by the
/// metric (`U_s/Φ`, `U_θ/Ψ`), either changes sign or drops below
/// `tol_rel · max|∇U|` somewhere in the 3×3 neighborhood of `k`. Critical
/// nodes are grouped by 4-connectivity with periodic wrap.
pub fn count_critical_points(op: &DiscreteOperator, u: &ScalarField, tol_rel: f64) -> Result<CriticalReport> {
    let (us, ut) = op.gradient_components(u)?;
    let g = *op.grid();
    let (ns, nt) = (g.ns(), g.ntheta());
    let (phi, psi) = (op.phi_nodes(), op.psi_nodes());
    let cs: Vec<f64> = us.iter().zip(phi).map(|(d, p)| d / p).collect();
    let ct: Vec<f64> = ut.iter().zip(psi).map(|(d, p)| d / p).collect();
    let mag: Vec<f64> = cs.iter().zip(&ct).map(|(a, b)| a.hypot(*b)).collect();
    let gmax = mag.iter().fold(0.0f64, |m, v| m.max(*v));
    let scale = u.sup_norm().max(1.0) / g.extent().min(1.0);
    if !(gmax > 1e-12 * scale) {
        return Err(Error::DegenerateField);
    }
    let tol = tol_rel * gmax;

    let neighbors = |i: usize, j: usize| -> Vec<usize> {
        let mut out = Vec::with_capacity(9);
        for di in [-1i64, 0, 1] {
            let ii = i as i64 + di;
            let ii = if g.is_periodic() {
                ii.rem_euclid(ns as i64) as usize
            } else if ii < 0 || ii >= ns as i64 {
                continue;
            } else {
                ii as usize
            };
            for dj in [-1i64, 0, 1] {
                let jj = (j as i64 + dj).rem_euclid(nt as i64) as usize;
                out.push(g.index(ii, jj));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    };
    let vanishes = |c: &[f64], nb: &[usize]| {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &k in nb {
            lo = lo.min(c[k]);
            hi = hi.max(c[k]);
        }
        lo <= 0.0 && hi >= 0.0 || nb.iter().any(|&k| c[k].abs() <= tol)
    };
    let mut critical = vec![false; g.len()];
    for i in 0..ns {
        for j in 0..nt {
            let nb = neighbors(i, j);
            critical[g.index(i, j)] = vanishes(&cs, &nb) && vanishes(&ct, &nb);
        }
    }

    let mut label = vec![usize::MAX; g.len()];
    let mut clusters = Vec::new();
    for start in 0..g.len() {
        if !critical[start] || label[start] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let mut stack = vec![start];
        let mut nodes = Vec::new();
        label[start] = id;
        while let Some(k) = stack.pop() {
            nodes.push(k);
            let (i, j) = g.coords(k);
            let mut adj = vec![g.index(i, (j + 1) % nt), g.index(i, (j + nt - 1) % nt)];
            if g.is_periodic() || i + 1 < ns {
                adj.push(g.index((i + 1) % ns, j));
            }
            if g.is_periodic() || i > 0 {
                adj.push(g.index((i + ns - 1) % ns, j));
            }
            for a in adj {
                if critical[a] && label[a] == usize::MAX {
                    label[a] = id;
                    stack.push(a);
                }
            }
        }
        nodes.sort_unstable();
        let rep = *nodes.iter().min_by(|a, b| mag[**a].total_cmp(&mag[**b])).expect("cluster is non-empty");
        let (i, j) = g.coords(rep);
        clusters.push(Cluster { s: g.s(i), theta: g.theta(j), size: nodes.len(), nodes });
    }
    Ok(CriticalReport { count: clusters.len(), clusters })
}
