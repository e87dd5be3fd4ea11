//! Compressed sparse row matrices.

/// Square or rectangular CSR matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays. Column indices inside each row are
    /// sorted and duplicates summed.
    pub fn from_csr(n_rows: usize, n_cols: usize, indptr: Vec<usize>, indices: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(indptr.len(), n_rows + 1);
        assert_eq!(indices.len(), data.len());
        let triplets = (0..n_rows)
            .flat_map(|i| (indptr[i]..indptr[i + 1]).map(move |k| (i, k)))
            .map(|(i, k)| (i, indices[k], data[k]));
        Self::from_triplets(n_rows, n_cols, triplets)
    }

    /// Sums duplicate entries. Explicit zeros are kept in the pattern.
    pub fn from_triplets<I>(n_rows: usize, n_cols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for (i, j, v) in triplets {
            assert!(i < n_rows && j < n_cols, "entry ({i}, {j}) out of bounds");
            rows[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    data.push(v);
                    last = Some(j);
                }
            }
            indptr.push(indices.len());
        }
        Self { n_rows, n_cols, indptr, indices, data }
    }

    pub fn identity(n: usize) -> Self {
        Self { n_rows: n, n_cols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), data: vec![1.0; n] }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[range.clone()], &self.data[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let dst = next[j];
                indices[dst] = i;
                data[dst] = v;
                next[j] += 1;
            }
        }
        Self { n_rows: self.n_cols, n_cols: self.n_rows, indptr, indices, data }
    }

    /// Sparse product `self * other` (row-wise Gustavson).
    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.n_cols, other.n_rows);
        let mut indptr = Vec::with_capacity(self.n_rows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut accum = vec![0.0; other.n_cols];
        let mut marker = vec![usize::MAX; other.n_cols];
        let mut touched = Vec::new();
        indptr.push(0);
        for i in 0..self.n_rows {
            touched.clear();
            let (a_cols, a_vals) = self.row(i);
            for (&k, &a) in a_cols.iter().zip(a_vals) {
                let (b_cols, b_vals) = other.row(k);
                for (&j, &b) in b_cols.iter().zip(b_vals) {
                    if marker[j] != i {
                        marker[j] = i;
                        accum[j] = 0.0;
                        touched.push(j);
                    }
                    accum[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                indices.push(j);
                data.push(accum[j]);
            }
            indptr.push(indices.len());
        }
        Self { n_rows: self.n_rows, n_cols: other.n_cols, indptr, indices, data }
    }

    /// Principal submatrix on the contiguous index range `lo..hi`.
    pub fn principal_block(&self, lo: usize, hi: usize) -> Self {
        let triplets = (lo..hi).flat_map(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).filter(move |(&j, _)| j >= lo && j < hi).map(move |(&j, &v)| (i - lo, j - lo, v))
        });
        Self::from_triplets(hi - lo, hi - lo, triplets)
    }

    /// Symmetric permutation `B[i][j] = A[perm[i]][perm[j]]` (`perm` maps new to old).
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        let n = self.n_rows;
        assert_eq!(n, self.n_cols);
        assert_eq!(perm.len(), n);
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let triplets = (0..n).flat_map(|new_i| {
            let (cols, vals) = self.row(perm[new_i]);
            let inverse = &inverse;
            cols.iter().zip(vals).map(move |(&j, &v)| (new_i, inverse[j], v))
        });
        Self::from_triplets(n, n, triplets)
    }

    /// Largest absolute entry of `A - Aᵀ`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - t.get(i, j)).abs());
            }
            let (cols, vals) = t.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        worst
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in dense.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        dense
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
