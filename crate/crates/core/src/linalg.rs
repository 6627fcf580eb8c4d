//! Banded direct factorizations.
//!
//! Grid operators are 5-point stencils, so with a suitable node ordering all
//! matrices here are banded with half-bandwidth `N_θ` (Neumann in `s`) or
//! `2 N_θ` (periodic in `s`, folded ordering).

use crate::error::{Error, Result};

/// Lower-band storage of a symmetric matrix with half-bandwidth `b`.
#[derive(Debug, Clone)]
pub struct SymmetricBanded {
    n: usize,
    b: usize,
    data: Vec<f64>, // row i holds columns i-b ..= i at offsets 0 ..= b
}

impl SymmetricBanded {
    pub fn zeros(n: usize, b: usize) -> Self {
        Self { n, b, data: vec![0.0; n * (b + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * (self.b + 1) + (self.b + j - i)
    }

    /// Adds `v` to entry `(i, j)`; entries above the diagonal are ignored so
    /// a full symmetric entry list can be streamed in.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if j > i {
            return;
        }
        assert!(i - j <= self.b, "entry ({i}, {j}) outside band {}", self.b);
        let k = self.at(i, j);
        self.data[k] += v;
    }

    /// In-place Cholesky `A = L Lᵀ`. Fails iff a pivot is not positive.
    pub fn cholesky(mut self) -> Result<BandedCholesky> {
        let (n, b) = (self.n, self.b);
        for i in 0..n {
            let lo_i = i.saturating_sub(b);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(b));
                let mut sum = self.data[self.at(i, j)];
                let ri = self.at(i, lo);
                let rj = self.at(j, lo);
                for k in 0..(j - lo) {
                    sum -= self.data[ri + k] * self.data[rj + k];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: sum });
                    }
                    let k = self.at(i, i);
                    self.data[k] = sum.sqrt();
                } else {
                    let d = self.data[self.at(j, j)];
                    let k = self.at(i, j);
                    self.data[k] = sum / d;
                }
            }
        }
        Ok(BandedCholesky { l: self })
    }
}

/// Factor produced by [`SymmetricBanded::cholesky`].
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    l: SymmetricBanded,
}

impl BandedCholesky {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b) = (self.l.n, self.l.b);
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let row = self.l.at(i, lo);
            let mut sum = x[i];
            for (k, j) in (lo..i).enumerate() {
                sum -= self.l.data[row + k] * x[j];
            }
            x[i] = sum / self.l.data[self.l.at(i, i)];
        }
        for i in (0..n).rev() {
            x[i] /= self.l.data[self.l.at(i, i)];
            let xi = x[i];
            let lo = i.saturating_sub(b);
            let row = self.l.at(i, lo);
            for (k, j) in (lo..i).enumerate() {
                x[j] -= self.l.data[row + k] * xi;
            }
        }
    }
}

/// General banded matrix factored by Gaussian elimination with partial
/// pivoting.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    w: usize,
    data: Vec<f64>, // row r stores columns r-kl .. r-kl+w
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Builds an `n × n` matrix with `kl` sub- and `ku` super-diagonals from
    /// `(row, col, value)` entries (duplicates are summed).
    pub fn from_entries(n: usize, kl: usize, ku: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let w = 2 * kl + ku + 1;
        let mut data = vec![0.0; n * w];
        for (r, c, v) in entries {
            assert!(c + kl >= r && c <= r + ku, "entry ({r}, {c}) outside band");
            data[r * w + (c + kl - r)] += v;
        }
        Self { n, kl, ku, w, data, pivots: vec![0; n] }
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        r * self.w + (c + self.kl - r)
    }

    /// Factorizes in place. `Singular(i)` if no usable pivot exists in
    /// column `i` (magnitude below `tiny`).
    pub fn factor(mut self, tiny: f64) -> Result<Self> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for i in 0..n {
            let last_row = (i + kl).min(n - 1);
            let last_col = (i + kl + ku).min(n - 1);
            let mut p = i;
            let mut best = self.data[self.idx(i, i)].abs();
            for r in i + 1..=last_row {
                let v = self.data[self.idx(r, i)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(Error::Singular(i));
            }
            self.pivots[i] = p;
            if p != i {
                for c in i..=last_col {
                    let (a, b) = (self.idx(i, c), self.idx(p, c));
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.idx(i, i)];
            for r in i + 1..=last_row {
                let ri = self.idx(r, i);
                let f = self.data[ri] / d;
                if f == 0.0 {
                    continue;
                }
                self.data[ri] = f;
                for c in i + 1..=last_col {
                    let u = self.data[self.idx(i, c)];
                    if u != 0.0 {
                        let k = self.idx(r, c);
                        self.data[k] -= f * u;
                    }
                }
            }
        }
        Ok(self)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for i in 0..n {
            let p = self.pivots[i];
            if p != i {
                x.swap(i, p);
            }
            let xi = x[i];
            if xi != 0.0 {
                for r in i + 1..=(i + kl).min(n - 1) {
                    x[r] -= self.data[self.idx(r, i)] * xi;
                }
            }
        }
        for i in (0..n).rev() {
            let mut sum = x[i];
            for c in i + 1..=(i + kl + ku).min(n - 1) {
                sum -= self.data[self.idx(i, c)] * x[c];
            }
            x[i] = sum / self.data[self.idx(i, i)];
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
