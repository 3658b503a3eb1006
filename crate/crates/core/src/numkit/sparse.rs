use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::scalar::Scalar;

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing within each row and no stored
/// value is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds from raw CSR arrays, validating the storage invariants.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        if indptr.len() != rows + 1 || indptr[0] != 0 || indptr[rows] != indices.len() {
            return Err(Error::shape("malformed CSR row offsets"));
        }
        if indices.len() != values.len() {
            return Err(Error::shape("CSR indices and values differ in length"));
        }
        for r in 0..rows {
            if indptr[r] > indptr[r + 1] {
                return Err(Error::shape(format!("row offsets decrease at row {r}")));
            }
            let cols_in_row = &indices[indptr[r]..indptr[r + 1]];
            if cols_in_row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Validation(format!(
                    "row {r}: column indices not strictly increasing"
                )));
            }
            if cols_in_row.iter().any(|&c| c >= cols) {
                return Err(Error::shape(format!("row {r}: column index out of range")));
            }
        }
        if values.iter().any(|v| v.is_zero()) {
            return Err(Error::Validation("explicit zero stored in CSR".into()));
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Builds from unordered `(row, col, value)` triplets; duplicates are
    /// summed and resulting zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r >= rows || c >= cols {
                return Err(Error::shape(format!(
                    "triplet ({r}, {c}) outside {rows}x{cols}"
                )));
            }
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of = Vec::with_capacity(sorted.len());
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                indices.push(c);
                values.push(v);
                row_of.push(r);
                last = Some((r, c));
            }
        }
        let mut keep_indices = Vec::with_capacity(indices.len());
        let mut keep_values = Vec::with_capacity(values.len());
        for ((c, v), r) in indices.into_iter().zip(values).zip(row_of) {
            if !v.is_zero() {
                keep_indices.push(c);
                keep_values.push(v);
                indptr[r + 1] += 1;
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices: keep_indices,
            values: keep_values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `(column, value)` pairs stored in row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Stored value at `(r, c)`, zero when absent.
    pub fn get(&self, r: usize, c: usize) -> T {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m.set(r, c, v);
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                triplets.push((c, r, v));
            }
        }
        Self::from_triplets(self.cols, self.rows, &triplets).expect("transpose of valid CSR")
    }

    /// Sparse-dense product `self * dense`.
    pub fn spmm(&self, dense: &Matrix<T>) -> Result<Matrix<T>> {
        if self.cols != dense.rows() {
            return Err(Error::shape(format!(
                "spmm: {}x{} times {}x{}",
                self.rows,
                self.cols,
                dense.rows(),
                dense.cols()
            )));
        }
        let mut out = Matrix::zeros(self.rows, dense.cols());
        for r in 0..self.rows {
            let span = self.indptr[r]..self.indptr[r + 1];
            let out_row = out.row_mut(r);
            for (&c, &v) in self.indices[span.clone()].iter().zip(&self.values[span]) {
                for (o, &d) in out_row.iter_mut().zip(dense.row(c)) {
                    *o += v * d;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * dense` without materializing the transpose.
    pub fn spmm_t(&self, dense: &Matrix<T>) -> Result<Matrix<T>> {
        if self.rows != dense.rows() {
            return Err(Error::shape(format!(
                "spmm_t: ({}x{})^T times {}x{}",
                self.rows,
                self.cols,
                dense.rows(),
                dense.cols()
            )));
        }
        let mut out = Matrix::zeros(self.cols, dense.cols());
        for r in 0..self.rows {
            let d_row = dense.row(r);
            for (c, v) in self.row(r) {
                for (o, &d) in out.row_mut(c).iter_mut().zip(d_row) {
                    *o += v * d;
                }
            }
        }
        Ok(out)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| self.row(r).all(|(c, v)| (self.get(c, r) - v).abs() <= tol))
    }

    pub fn cast<U: Scalar>(&self) -> CsrMatrix<U> {
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_are_sorted_and_merged() {
        let s = CsrMatrix::<f64>::from_triplets(
            2,
            3,
            &[(1, 2, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 2, 1.5), (0, 0, 0.0)],
        )
        .unwrap();
        assert_eq!(s.indptr(), &[0, 1, 3]);
        assert_eq!(s.indices(), &[1, 0, 2]);
        assert_eq!(s.values(), &[2.0, 3.0, 2.5]);
    }

    #[test]
    fn rejects_unsorted_columns() {
        let err = CsrMatrix::<f64>::from_csr(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_explicit_zero() {
        let err = CsrMatrix::<f64>::from_csr(1, 3, vec![0, 1], vec![1], vec![0.0]);
        assert!(err.is_err());
    }

    #[test]
    fn spmm_dimension_mismatch() {
        let s = CsrMatrix::<f32>::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap();
        assert!(s.spmm(&Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn spmm_t_matches_transpose() {
        let s = CsrMatrix::<f64>::from_triplets(3, 2, &[(0, 1, 2.0), (2, 0, -1.0), (1, 1, 0.5)])
            .unwrap();
        let d = Matrix::<f64>::from_fn(3, 2, |i, j| (i + 2 * j) as f64);
        let a = s.spmm_t(&d).unwrap();
        let b = s.transpose().spmm(&d).unwrap();
        assert_eq!(a, b);
    }
}
