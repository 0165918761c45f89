//! Dense Cholesky factorization for the symmetric positive definite
//! systems `(I − δÂ)` and `((λ+ε+η+1)I − Â)`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, Axis, NdFloat};

use crate::error::{Error, Result};

use super::sparse::SparseOperator;

/// Solver for a symmetric positive definite system `M x = b`.
///
/// Diagonal systems (graphs without edges) are solved by division so that
/// trivial cases stay exact.
#[derive(Debug, Clone)]
pub enum SpdSolver {
    Diagonal(Vec<f64>),
    Cholesky(CholeskyFactor),
}

impl SpdSolver {
    pub fn factor(matrix: &SparseOperator) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::dims(
                "cholesky",
                "square matrix",
                format!("{}x{}", matrix.rows(), matrix.cols()),
            ));
        }
        if matrix.is_diagonal() {
            let diag = matrix.diagonal_values();
            if let Some((pivot, &value)) = diag.iter().enumerate().find(|(_, &d)| !(d > 0.0)) {
                return Err(Error::NotPositiveDefinite { pivot, value });
            }
            return Ok(SpdSolver::Diagonal(diag));
        }
        CholeskyFactor::new(matrix).map(SpdSolver::Cholesky)
    }

    pub fn dim(&self) -> usize {
        match self {
            SpdSolver::Diagonal(d) => d.len(),
            SpdSolver::Cholesky(f) => f.n,
        }
    }

    /// Solves `M X = B` for every column of `B`.
    pub fn solve<T: NdFloat>(&self, rhs: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if rhs.nrows() != self.dim() {
            return Err(Error::dims(
                "solve",
                format!("rhs with {} rows", self.dim()),
                format!("{} rows", rhs.nrows()),
            ));
        }
        match self {
            SpdSolver::Diagonal(diag) => {
                let mut out = rhs.to_owned();
                for (mut row, &d) in out.rows_mut().into_iter().zip(diag) {
                    let d = T::from(d).expect("representable pivot");
                    row.mapv_inplace(|v| v / d);
                }
                Ok(out)
            }
            SpdSolver::Cholesky(f) => Ok(f.solve(rhs)),
        }
    }
}

/// Lower-triangular `L` with `M = L Lᵀ`, stored densely (upper part zero).
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    lower: Array2<f64>,
}

/// Panel width of the blocked factorization and solves.
const BLOCK: usize = 64;

impl CholeskyFactor {
    /// Left-looking blocked factorization; the off-diagonal work runs as
    /// matrix products, the diagonal blocks by the scalar recurrence.
    pub fn new(matrix: &SparseOperator) -> Result<Self> {
        let n = matrix.rows();
        let mut a = Array2::<f64>::zeros((n, n));
        for (r, c, v) in matrix.triplets() {
            if c <= r {
                a[[r, c]] = v;
            }
        }
        for k0 in (0..n).step_by(BLOCK) {
            let k1 = (k0 + BLOCK).min(n);
            let (done, mut rest) = a.view_mut().split_at(Axis(1), k0);
            let mut panel = rest.slice_mut(s![.., ..k1 - k0]);
            if k0 > 0 {
                // A[k0.., K] -= L[k0.., ..k0] · L[K, ..k0]ᵀ
                let left = done.slice(s![k0.., ..]);
                let top = done.slice(s![k0..k1, ..]);
                let mut target = panel.slice_mut(s![k0.., ..]);
                general_mat_mul(-1.0, &left, &top.t(), 1.0, &mut target);
            }
            // Diagonal block.
            for i in 0..k1 - k0 {
                for j in 0..=i {
                    let mut value = panel[[k0 + i, j]];
                    for l in 0..j {
                        value -= panel[[k0 + i, l]] * panel[[k0 + j, l]];
                    }
                    if j == i {
                        if !(value > 0.0) {
                            return Err(Error::NotPositiveDefinite { pivot: k0 + i, value });
                        }
                        panel[[k0 + i, i]] = value.sqrt();
                    } else {
                        panel[[k0 + i, j]] = value / panel[[k0 + j, j]];
                    }
                }
                for j in i + 1..k1 - k0 {
                    panel[[k0 + i, j]] = 0.0;
                }
            }
            // Rows below: A[R, K] ← A[R, K] · L[K, K]⁻ᵀ.
            for r in k1..n {
                for j in 0..k1 - k0 {
                    let mut value = panel[[r, j]];
                    for l in 0..j {
                        value -= panel[[r, l]] * panel[[k0 + j, l]];
                    }
                    panel[[r, j]] = value / panel[[k0 + j, j]];
                }
            }
        }
        Ok(Self { n, lower: a })
    }

    fn solve<T: NdFloat>(&self, rhs: ArrayView2<'_, T>) -> Array2<T> {
        // Solved in double precision regardless of T.
        let mut x = rhs.mapv(|v| v.to_f64().expect("float"));
        let n = self.n;
        let l = &self.lower;
        // Forward substitution L y = b.
        for k0 in (0..n).step_by(BLOCK) {
            let k1 = (k0 + BLOCK).min(n);
            let (solved, mut rest) = x.view_mut().split_at(Axis(0), k0);
            let mut block = rest.slice_mut(s![..k1 - k0, ..]);
            if k0 > 0 {
                general_mat_mul(-1.0, &l.slice(s![k0..k1, ..k0]), &solved, 1.0, &mut block);
            }
            for i in 0..k1 - k0 {
                for j in 0..i {
                    let lij = l[[k0 + i, k0 + j]];
                    if lij != 0.0 {
                        let (upper, mut lower) = block.view_mut().split_at(Axis(0), i);
                        lower.row_mut(0).scaled_add(-lij, &upper.row(j));
                    }
                }
                let d = l[[k0 + i, k0 + i]];
                block.row_mut(i).mapv_inplace(|v| v / d);
            }
        }
        // Back substitution Lᵀ x = y.
        let starts: Vec<usize> = (0..n).step_by(BLOCK).collect();
        for &k0 in starts.iter().rev() {
            let k1 = (k0 + BLOCK).min(n);
            let (head, tail) = x.view_mut().split_at(Axis(0), k1);
            let mut block = head.slice_move(s![k0.., ..]);
            if k1 < n {
                general_mat_mul(-1.0, &l.slice(s![k1.., k0..k1]).t(), &tail, 1.0, &mut block);
            }
            for i in (0..k1 - k0).rev() {
                for j in i + 1..k1 - k0 {
                    let lji = l[[k0 + j, k0 + i]];
                    if lji != 0.0 {
                        let (mut upper, lower) = block.view_mut().split_at(Axis(0), j);
                        upper.row_mut(i).scaled_add(-lji, &lower.row(0));
                    }
                }
                let d = l[[k0 + i, k0 + i]];
                block.row_mut(i).mapv_inplace(|v| v / d);
            }
        }
        x.mapv(|v| T::from(v).expect("representable solution"))
    }
}
