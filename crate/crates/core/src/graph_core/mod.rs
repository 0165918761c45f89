//! Graphs, sparse operators and the precomputed operator bundle.

mod bundle;
mod cholesky;
mod graph;
mod sparse;

pub use bundle::{
    precompute_operators, BundleOptions, GlobalSolver, OperatorBundle, SolverChoice,
    DEFAULT_DENSE_THRESHOLD,
};
pub use cholesky::{CholeskyFactor, SpdSolver};
pub use graph::{
    degree_matrix, laplacian, log_operator, normalize_sym, row_normalize, Graph, LaplacianMode,
};
pub use sparse::SparseOperator;

/// Dense `N × d` node feature / embedding matrix.
pub type FeatureMatrix = ndarray::Array2<f64>;

/// Sparse × dense product `op · dense`.
pub fn spmm<T: ndarray::NdFloat>(
    op: &SparseOperator,
    dense: ndarray::ArrayView2<'_, T>,
) -> crate::Result<ndarray::Array2<T>> {
    op.spmm(dense)
}
