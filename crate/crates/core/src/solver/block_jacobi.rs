//! Block-Jacobi preconditioner over contiguous index ranges.

use super::cholesky::CholeskyFactor;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct BlockJacobi {
    ranges: Vec<(usize, usize)>,
    factors: Vec<CholeskyFactor>,
}

/// Default block count for a system of dimension `n`: one block per 500
/// unknowns, at least 4, at most `n`.
pub fn default_block_count(n: usize) -> usize {
    (n / 500).max(4).min(n.max(1))
}

/// Splits `0..n` into `blocks` contiguous ranges whose sizes differ by at most one.
pub fn partition(n: usize, blocks: usize) -> Vec<(usize, usize)> {
    let base = n / blocks;
    let extra = n % blocks;
    let mut lo = 0;
    (0..blocks)
        .map(|b| {
            let hi = lo + base + usize::from(b < extra);
            let r = (lo, hi);
            lo = hi;
            r
        })
        .collect()
}

impl BlockJacobi {
    pub fn new(a: &CsrMatrix, n_blocks: usize) -> Result<Self> {
        let n = a.n_rows();
        if n_blocks == 0 || n_blocks > n {
            return Err(Error::InvalidBlockCount { blocks: n_blocks, n });
        }
        let ranges = partition(n, n_blocks);
        let factors = ranges
            .iter()
            .map(|&(lo, hi)| {
                CholeskyFactor::new(&a.principal_block(lo, hi)).map_err(|e| match e {
                    Error::NotSpd { row, pivot } => Error::NotSpd { row: row + lo, pivot },
                    other => other,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { ranges, factors })
    }

    pub fn n_blocks(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[(usize, usize)] {
        &self.ranges
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        for (&(lo, hi), f) in self.ranges.iter().zip(&self.factors) {
            f.solve_in_place(&mut z[lo..hi]);
        }
    }
}
