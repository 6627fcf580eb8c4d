//! Symmetric divergence-form discretization of the Laplace–Beltrami operator
//!
//! ```text
//!   Δu = 1/(ΦΨ) [ ∂_s((Ψ/Φ) u_s) + ∂_θ((Φ/Ψ) u_θ) ]
//! ```
//!
//! on a cell-centered grid. Face coefficients are evaluated at the face
//! midpoints. No-flux ends (mirror ghost cells) simply drop the boundary
//! faces, so the stiffness `L̂` is symmetric with zero row sums and the mass
//! `M = ΦΨ h_s h_θ` is a positive diagonal.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::geometry::{STopology, SurfaceMetric};
use crate::grid::{Grid2D, GridTopology, ScalarField};
use crate::linalg::{BandedLu, SymmetricBanded};

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: Grid2D,
    /// Coupling across the face between `(i, j)` and `(i+1, j)`; zero on the
    /// last row unless `s` is periodic.
    face_s: Vec<f64>,
    /// Coupling across the face between `(i, j)` and `(i, j+1 mod N_θ)`.
    face_theta: Vec<f64>,
    mass: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

fn topology_matches(surface: STopology, grid: GridTopology) -> bool {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    match (surface, grid) {
        (STopology::Neumann { length: a }, GridTopology::NeumannInterval { length: b }) => close(a, b),
        (STopology::Periodic { period: a }, GridTopology::Periodic { period: b }) => close(a, b),
        _ => false,
    }
}

/// Assembles `L̂` and `M` for `surface` on `grid`.
pub fn assemble(surface: &dyn SurfaceMetric, grid: &Grid2D) -> Result<DiscreteOperator> {
    if !topology_matches(surface.s_topology(), grid.topology()) {
        return Err(Error::GridMismatch(format!(
            "surface topology {:?} does not match grid {:?}",
            surface.s_topology(),
            grid.topology()
        )));
    }
    let (ns, nt) = (grid.ns(), grid.ntheta());
    if nt == 1 && surface.curvature() != 0.0 {
        return Err(Error::GridMismatch("axisymmetric grid requires kappa = 0".into()));
    }
    let (hs, ht) = (grid.hs(), grid.htheta());
    let n = grid.len();
    let mut face_s = vec![0.0; n];
    let mut face_theta = vec![0.0; n];
    let mut mass = vec![0.0; n];
    let mut phi = vec![0.0; n];
    let mut psi = vec![0.0; n];

    let check = |v: f64| if v > 0.0 && v.is_finite() { Ok(v) } else { Err(Error::DegenerateMetric(v)) };

    for i in 0..ns {
        let s = grid.s(i);
        let (psi_i, _) = surface.radius(s);
        if !(psi_i > 0.0) {
            return Err(Error::InvalidArgument(format!("Psi({s}) = {psi_i} is not positive")));
        }
        let s_face = (i as f64 + 1.0) * hs;
        let has_s_face = i + 1 < ns || grid.is_periodic();
        let (psi_f, _) = surface.radius(s_face);
        for j in 0..nt {
            let k = grid.index(i, j);
            let theta = grid.theta(j);
            let ph = check(surface.phi(s, theta))?;
            phi[k] = ph;
            psi[k] = psi_i;
            mass[k] = ph * psi_i * hs * ht;
            if has_s_face {
                let pf = check(surface.phi(s_face, theta))?;
                face_s[k] = psi_f / pf * ht / hs;
            }
            if nt > 1 {
                let pf = check(surface.phi(s, theta + 0.5 * ht))?;
                face_theta[k] = pf / psi_i * hs / ht;
            }
        }
    }
    Ok(DiscreteOperator { grid: *grid, face_s, face_theta, mass, phi, psi })
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Diagonal of `M` (nodal area weights).
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// `Φ` at the nodes.
    pub fn phi_nodes(&self) -> &[f64] {
        &self.phi
    }

    /// `Ψ` at the nodes.
    pub fn psi_nodes(&self) -> &[f64] {
        &self.psi
    }

    pub fn total_area(&self) -> f64 {
        self.mass.iter().sum()
    }

    #[inline]
    fn s_neighbor(&self, k: usize) -> Option<usize> {
        let (i, j) = self.grid.coords(k);
        if i + 1 < self.grid.ns() {
            Some(self.grid.index(i + 1, j))
        } else if self.grid.is_periodic() {
            Some(self.grid.index(0, j))
        } else {
            None
        }
    }

    #[inline]
    fn theta_neighbor(&self, k: usize) -> Option<usize> {
        let nt = self.grid.ntheta();
        if nt == 1 {
            return None;
        }
        let (i, j) = self.grid.coords(k);
        Some(self.grid.index(i, (j + 1) % nt))
    }

    /// Calls `f(a, b, c)` once per interior face with coupling `c > 0`.
    pub fn for_each_face(&self, mut f: impl FnMut(usize, usize, f64)) {
        for k in 0..self.grid.len() {
            if let Some(nb) = self.s_neighbor(k) {
                f(k, nb, self.face_s[k]);
            }
            if let Some(nb) = self.theta_neighbor(k) {
                f(k, nb, self.face_theta[k]);
            }
        }
    }

    /// `out = L̂ u` (raw values, no mass scaling).
    pub fn stiffness_apply(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.for_each_face(|a, b, c| {
            let flux = c * (u[b] - u[a]);
            out[a] += flux;
            out[b] -= flux;
        });
    }

    /// Discrete `Δu = M⁻¹ L̂ u`.
    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        self.check_field(u)?;
        let mut out = vec![0.0; self.grid.len()];
        self.stiffness_apply(u.values(), &mut out);
        for (v, m) in out.iter_mut().zip(&self.mass) {
            *v /= m;
        }
        ScalarField::new(self.grid, out)
    }

    pub fn check_field(&self, u: &ScalarField) -> Result<()> {
        if *u.grid() != self.grid {
            return Err(Error::GridMismatch(format!("field grid {:?} vs operator grid {:?}", u.grid(), self.grid)));
        }
        Ok(())
    }

    /// Diagonal of `L̂`.
    pub fn stiffness_diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.grid.len()];
        self.for_each_face(|a, b, c| {
            d[a] -= c;
            d[b] -= c;
        });
        d
    }

    /// Central differences `(u_s, u_θ)` at every node; mirror ghosts at
    /// no-flux ends, wrap-around on periodic directions.
    pub fn gradient_components(&self, u: &ScalarField) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_field(u)?;
        let g = &self.grid;
        let (ns, nt) = (g.ns(), g.ntheta());
        let v = u.values();
        let (hs, ht) = (g.hs(), g.htheta());
        let mut us = vec![0.0; g.len()];
        let mut ut = vec![0.0; g.len()];
        for i in 0..ns {
            let (ip, im) = if g.is_periodic() {
                ((i + 1) % ns, (i + ns - 1) % ns)
            } else {
                ((i + 1).min(ns - 1), i.saturating_sub(1))
            };
            for j in 0..nt {
                let k = g.index(i, j);
                us[k] = (v[g.index(ip, j)] - v[g.index(im, j)]) / (2.0 * hs);
                if nt > 1 {
                    let (jp, jm) = ((j + 1) % nt, (j + nt - 1) % nt);
                    ut[k] = (v[g.index(i, jp)] - v[g.index(i, jm)]) / (2.0 * ht);
                }
            }
        }
        Ok((us, ut))
    }

    /// `|∇u|² = u_s²/Φ² + u_θ²/Ψ²` at the nodes.
    pub fn gradient_sq(&self, u: &ScalarField) -> Result<ScalarField> {
        let (us, ut) = self.gradient_components(u)?;
        let values = (0..self.grid.len())
            .map(|k| us[k] * us[k] / (self.phi[k] * self.phi[k]) + ut[k] * ut[k] / (self.psi[k] * self.psi[k]))
            .collect();
        ScalarField::new(self.grid, values)
    }

    /// `(row, col, value)` triplets of `L̂`, sorted by `(row, col)`.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(5 * self.grid.len());
        let diag = self.stiffness_diagonal();
        for (k, &d) in diag.iter().enumerate() {
            t.push((k, k, d));
        }
        self.for_each_face(|a, b, c| {
            t.push((a, b, c));
            t.push((b, a, c));
        });
        t.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        t
    }

    /// Coordinate dump, one `i j value` line per stored entry.
    pub fn write_triplets(&self, mut w: impl Write) -> io::Result<()> {
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {v:.16e}")?;
        }
        Ok(())
    }

    /// Position of each node in the banded ordering.
    ///
    /// Periodic `s` rows are folded (`0, P−1, 1, P−2, …`) so wrap-around
    /// neighbors stay within two rows.
    pub fn band_order(&self) -> (Vec<usize>, usize) {
        let (ns, nt) = (self.grid.ns(), self.grid.ntheta());
        let row_pos = |i: usize| {
            if !self.grid.is_periodic() {
                i
            } else if i < ns.div_ceil(2) {
                2 * i
            } else {
                2 * (ns - 1 - i) + 1
            }
        };
        let order = (0..self.grid.len()).map(|k| row_pos(k / nt) * nt + k % nt).collect();
        let rows = if self.grid.is_periodic() { 2 } else { 1 };
        (order, (rows * nt).max(1))
    }

    /// `α L̂ + diag(d)` in banded symmetric storage (banded ordering).
    pub fn banded_symmetric(&self, alpha: f64, diag: &[f64]) -> (SymmetricBanded, Vec<usize>) {
        let (order, b) = self.band_order();
        let mut a = SymmetricBanded::zeros(self.grid.len(), b);
        for (k, (&d, l)) in diag.iter().zip(self.stiffness_diagonal()).enumerate() {
            a.add(order[k], order[k], d + alpha * l);
        }
        self.for_each_face(|p, q, c| {
            let (x, y) = (order[p], order[q]);
            let (r, cidx) = if x > y { (x, y) } else { (y, x) };
            a.add(r, cidx, alpha * c);
        });
        (a, order)
    }

    /// `α L̂ + diag(d)` as a general banded matrix (banded ordering).
    pub fn banded_general(&self, alpha: f64, diag: &[f64]) -> (BandedLu, Vec<usize>) {
        let (order, b) = self.band_order();
        let mut entries = Vec::with_capacity(5 * self.grid.len());
        for (k, (&d, l)) in diag.iter().zip(self.stiffness_diagonal()).enumerate() {
            entries.push((order[k], order[k], d + alpha * l));
        }
        self.for_each_face(|p, q, c| {
            entries.push((order[p], order[q], alpha * c));
            entries.push((order[q], order[p], alpha * c));
        });
        (BandedLu::from_entries(self.grid.len(), b, b, entries), order)
    }
}
