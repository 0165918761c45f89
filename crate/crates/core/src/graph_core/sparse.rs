//! Compressed sparse row operators over node indices.

use ndarray::{Array2, ArrayView2, Axis, NdFloat};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Output rows × columns below which `spmm` stays on the calling thread.
const PAR_MIN_WORK: usize = 1 << 14;

/// A real sparse matrix in canonical CSR form: column indices strictly
/// increasing within each row and no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Builds an operator from `(row, col, value)` triplets in any order.
    ///
    /// Duplicate coordinates are summed and exact zeros dropped. Duplicates
    /// are summed in a fixed order, so any permutation of the same triplets
    /// yields bit-identical storage.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(r, c, v) in &triplets {
            if r >= rows || c >= cols {
                return Err(Error::dims(
                    "from_triplets",
                    format!("index within {rows}x{cols}"),
                    format!("({r}, {c})"),
                ));
            }
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "non-finite value {v} at ({r}, {c})"
                )));
            }
        }
        triplets.sort_unstable_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
        });

        let mut row_offsets = vec![0usize; rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut i = 0;
        while i < triplets.len() {
            let (r, c, mut v) = triplets[i];
            i += 1;
            while i < triplets.len() && triplets[i].0 == r && triplets[i].1 == c {
                v += triplets[i].2;
                i += 1;
            }
            if v != 0.0 {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
            }
        }
        for r in 0..rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        row_offsets.push(0);
        for (i, &d) in diag.iter().enumerate() {
            if d != 0.0 {
                col_indices.push(i);
                values.push(d);
            }
            row_offsets.push(col_indices.len());
        }
        Self {
            rows: n,
            cols: n,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Operator with no stored entries.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    /// Stored value at `(r, c)`, zero when absent.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    /// True when every stored entry sits on the diagonal.
    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|r| self.row(r).0.iter().all(|&c| c == r))
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in increasing order, so each output row stays sorted.
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = next[c];
                col_indices[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// Largest |A - Aᵀ| over all entries; zero for structurally symmetric
    /// operators with mirrored values.
    pub fn max_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out.values_changed();
        out
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dims(
                "linear_combination",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let triplets = self
            .triplets()
            .map(|(r, c, v)| (r, c, a * v))
            .chain(other.triplets().map(|(r, c, v)| (r, c, b * v)))
            .collect();
        Self::from_triplets(self.rows, self.cols, triplets)
    }

    /// Sparse-sparse product `self · rhs` (row-wise Gustavson accumulation).
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::dims(
                "sparse matmul",
                format!("rhs with {} rows", self.cols),
                format!("{} rows", rhs.rows),
            ));
        }
        let mut acc = vec![0.0f64; rhs.cols];
        let mut occupied = vec![false; rhs.cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_offsets = Vec::with_capacity(self.rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for r in 0..self.rows {
            let (lcols, lvals) = self.row(r);
            for (&k, &lv) in lcols.iter().zip(lvals) {
                let (rcols, rvals) = rhs.row(k);
                for (&c, &rv) in rcols.iter().zip(rvals) {
                    if !occupied[c] {
                        occupied[c] = true;
                        touched.push(c);
                    }
                    acc[c] += lv * rv;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c] != 0.0 {
                    col_indices.push(c);
                    values.push(acc[c]);
                }
                acc[c] = 0.0;
                occupied[c] = false;
            }
            touched.clear();
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            rows: self.rows,
            cols: rhs.cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Sparse × dense product.
    ///
    /// Each output row accumulates its stored entries in column order, so
    /// the result is bit-identical regardless of thread count.
    pub fn spmm<T: NdFloat>(&self, dense: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if dense.nrows() != self.cols {
            return Err(Error::dims(
                "spmm",
                format!("dense with {} rows", self.cols),
                format!("{} rows", dense.nrows()),
            ));
        }
        let mut out = Array2::<T>::zeros((self.rows, dense.ncols()));
        let fill_row = |r: usize, mut out_row: ndarray::ArrayViewMut1<'_, T>| {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let w = T::from(v).expect("operator value representable");
                out_row.scaled_add(w, &dense.row(c));
            }
        };
        if self.rows * dense.ncols() >= PAR_MIN_WORK {
            out.axis_iter_mut(Axis(0))
                .into_par_iter()
                .enumerate()
                .for_each(|(r, row)| fill_row(r, row));
        } else {
            for (r, row) in out.axis_iter_mut(Axis(0)).enumerate() {
                fill_row(r, row);
            }
        }
        Ok(out)
    }

    /// Dense copy, for small operators and test oracles.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for (r, c, v) in self.triplets() {
            out[[r, c]] = v;
        }
        out
    }

    fn values_changed(&mut self) {
        if self.values.iter().any(|&v| v == 0.0) {
            let triplets = self.triplets().collect();
            *self = Self::from_triplets(self.rows, self.cols, triplets)
                .expect("rebuilding from own triplets");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn triplets_are_canonicalized() {
        let op = SparseOperator::from_triplets(
            2,
            3,
            vec![(1, 2, 1.0), (0, 1, 2.0), (1, 0, 3.0), (0, 1, -2.0), (1, 2, 0.5)],
        )
        .unwrap();
        assert_eq!(op.row_offsets(), &[0, 0, 2]);
        assert_eq!(op.col_indices(), &[0, 2]);
        assert_eq!(op.values(), &[3.0, 1.5]);
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(SparseOperator::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn transpose_matches_dense() {
        let op =
            SparseOperator::from_triplets(2, 3, vec![(0, 2, 1.0), (1, 0, 2.0), (1, 2, 3.0)])
                .unwrap();
        assert_eq!(op.transpose().to_dense(), op.to_dense().t().to_owned());
    }

    #[test]
    fn matmul_matches_dense() {
        let a = SparseOperator::from_triplets(
            3,
            3,
            vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0), (2, 0, 4.0)],
        )
        .unwrap();
        let b = SparseOperator::from_triplets(3, 2, vec![(0, 1, 1.0), (2, 0, 3.0), (1, 1, 5.0)])
            .unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.to_dense(), a.to_dense().dot(&b.to_dense()));
    }

    #[test]
    fn matmul_drops_cancelled_entries() {
        let a = SparseOperator::from_triplets(1, 2, vec![(0, 0, 1.0), (0, 1, -1.0)]).unwrap();
        let b = SparseOperator::from_triplets(2, 1, vec![(0, 0, 2.0), (1, 0, 2.0)]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().nnz(), 0);
    }

    #[test]
    fn spmm_identity_is_exact() {
        let x = array![[1.25, -3.0], [0.1, 7.5], [1e-300, 2.0]];
        let y = SparseOperator::identity(3).spmm(x.view()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn spmm_zero_rows() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let y = SparseOperator::zeros(2, 2).spmm(x.view()).unwrap();
        assert_eq!(y, Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn spmm_rejects_mismatch() {
        let x = Array2::<f64>::zeros((3, 2));
        assert!(matches!(
            SparseOperator::identity(2).spmm(x.view()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spmm_works_in_single_precision() {
        let op = SparseOperator::from_triplets(2, 2, vec![(0, 1, 0.5), (1, 0, 2.0)]).unwrap();
        let x = array![[1.0f32], [4.0f32]];
        assert_eq!(op.spmm(x.view()).unwrap(), array![[2.0f32], [2.0f32]]);
    }
}
