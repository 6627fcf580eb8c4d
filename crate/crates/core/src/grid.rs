//! Cell-centered `(s, θ)` grids and nodal fields.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::STopology;

/// Uniform grid on `[0, l] × S¹` (Neumann in `s`) or `[0, P) × S¹` (periodic).
///
/// Nodes sit at `s_i = (i + ½) h_s`, `θ_j = j h_θ`. `ntheta = 1` is the
/// axisymmetric reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    ns: usize,
    ntheta: usize,
    topology: GridTopology,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridTopology {
    NeumannInterval { length: f64 },
    Periodic { period: f64 },
}

impl From<STopology> for GridTopology {
    fn from(t: STopology) -> Self {
        match t {
            STopology::Neumann { length } => GridTopology::NeumannInterval { length },
            STopology::Periodic { period } => GridTopology::Periodic { period },
        }
    }
}

impl Grid2D {
    pub fn new(ns: usize, ntheta: usize, topology: impl Into<GridTopology>) -> Result<Self> {
        let topology = topology.into();
        if ns < 8 {
            return Err(Error::InvalidArgument(format!("N_s must be at least 8, got {ns}")));
        }
        if ntheta != 1 && ntheta < 8 {
            return Err(Error::InvalidArgument(format!(
                "N_theta must be 1 (axisymmetric) or at least 8, got {ntheta}"
            )));
        }
        let extent = match topology {
            GridTopology::NeumannInterval { length } => length,
            GridTopology::Periodic { period } => period,
        };
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid extent must be positive, got {extent}")));
        }
        Ok(Self { ns, ntheta, topology })
    }

    pub fn neumann(ns: usize, ntheta: usize, length: f64) -> Result<Self> {
        Self::new(ns, ntheta, GridTopology::NeumannInterval { length })
    }

    pub fn periodic(ns: usize, ntheta: usize, period: f64) -> Result<Self> {
        Self::new(ns, ntheta, GridTopology::Periodic { period })
    }

    pub fn ns(&self) -> usize {
        self.ns
    }

    pub fn ntheta(&self) -> usize {
        self.ntheta
    }

    pub fn topology(&self) -> GridTopology {
        self.topology
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.topology, GridTopology::Periodic { .. })
    }

    pub fn extent(&self) -> f64 {
        match self.topology {
            GridTopology::NeumannInterval { length } => length,
            GridTopology::Periodic { period } => period,
        }
    }

    pub fn hs(&self) -> f64 {
        self.extent() / self.ns as f64
    }

    pub fn htheta(&self) -> f64 {
        2.0 * PI / self.ntheta as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hs()
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.htheta()
    }

    pub fn len(&self) -> usize {
        self.ns * self.ntheta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ntheta + j
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k / self.ntheta, k % self.ntheta)
    }

    /// Same grid with a different number of `θ` cells.
    pub fn with_ntheta(&self, ntheta: usize) -> Result<Self> {
        Self::new(self.ns, ntheta, self.topology)
    }
}

/// Nodal values on a [`Grid2D`], row-major with `s` outer.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite field value at node {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.ns() {
            let s = grid.s(i);
            for j in 0..grid.ntheta() {
                values.push(f(s, grid.theta(j)));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<ScalarField> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(ScalarField { grid: self.grid, values })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Largest variation across `θ` on any `s` row.
    pub fn theta_variation(&self) -> f64 {
        let nt = self.grid.ntheta();
        self.values
            .chunks(nt)
            .map(|row| {
                let (lo, hi) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Values on the same `s` rows with `θ` replicated `ntheta` times; the
    /// source must be axisymmetric (`ntheta = 1`).
    pub fn extrude(&self, ntheta: usize) -> Result<ScalarField> {
        if self.grid.ntheta() != 1 {
            return Err(Error::GridMismatch("extrude needs an axisymmetric field".into()));
        }
        let grid = self.grid.with_ntheta(ntheta)?;
        let values = self.values.iter().flat_map(|&v| std::iter::repeat(v).take(ntheta)).collect();
        Ok(ScalarField { grid, values })
    }
}
