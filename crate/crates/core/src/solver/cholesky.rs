//! Envelope (profile) Cholesky factorization.
//!
//! The matrix is reordered by reverse Cuthill-McKee and factored inside its
//! row envelope: row `i` of `L` is stored densely from its first nonzero
//! column to the diagonal. All fill produced by the factorization lies inside
//! that envelope.

use super::ordering::reverse_cuthill_mckee;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    /// `perm[new] = old`; `None` for the identity ordering.
    perm: Option<Vec<usize>>,
    first: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl CholeskyFactor {
    /// Factors `a` after a reverse Cuthill-McKee reordering.
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let perm = reverse_cuthill_mckee(a);
        let permuted = a.permute_symmetric(&perm);
        let mut f = Self::natural(&permuted)?;
        f.perm = Some(perm);
        Ok(f)
    }

    /// Factors `a` in its given order. Only the lower triangle is read.
    pub fn natural(a: &CsrMatrix) -> Result<Self> {
        let n = a.n_rows();
        assert_eq!(n, a.n_cols());
        let first: Vec<usize> = (0..n).map(|i| a.row(i).0.first().copied().unwrap_or(i).min(i)).collect();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + i - first[i] + 1);
        }
        let mut values = vec![0.0; offsets[n]];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    values[offsets[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let row_i = offsets[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let row_j = offsets[j];
                let mut s = values[row_i + j - fi];
                for k in lo..j {
                    s -= values[row_i + k - fi] * values[row_j + k - fj];
                }
                values[row_i + j - fi] = s / values[row_j + j - fj];
            }
            let mut d = values[row_i + i - fi];
            for k in fi..i {
                let l = values[row_i + k - fi];
                d -= l * l;
            }
            if !(d > 0.0) {
                return Err(Error::NotSpd { row: i, pivot: d });
            }
            values[row_i + i - fi] = d.sqrt();
        }
        Ok(Self { perm: None, first, offsets, values })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    /// Overwrites `x` with `A⁻¹ x`.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        let mut y = match &self.perm {
            Some(p) => p.iter().map(|&old| x[old]).collect(),
            None => x.to_vec(),
        };
        // L y = b
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1]];
            let mut s = y[i];
            for (k, &l) in (fi..i).zip(row) {
                s -= l * y[k];
            }
            y[i] = s / row[i - fi];
        }
        // Lᵀ x = y, column sweep over the rows of L
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (k, &l) in (fi..i).zip(row) {
                y[k] -= l * yi;
            }
        }
        match &self.perm {
            Some(p) => {
                for (new, &old) in p.iter().enumerate() {
                    x[old] = y[new];
                }
            }
            None => x.copy_from_slice(&y),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
