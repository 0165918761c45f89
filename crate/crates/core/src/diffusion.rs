//! Passive (baseline) and active diffusion on a precomputed operator bundle.
//!
//! Active diffusion iterates `H ← S + δÂH` from `H⁽⁰⁾ = X*` with the fixed
//! source `S = αX* + βL̂ÂX* + γL̂X*`. Its limit `H* = (I − δÂ)⁻¹S` is computed
//! either by a dense factorization or by a truncated Neumann series.

use ndarray::{Array2, ArrayView2, NdFloat, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_core::{row_normalize, GlobalSolver, OperatorBundle, SparseOperator};

/// Row-sum tolerance for operators handed to [`passive_step`].
const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Active-diffusion steps for the local embeddings.
    pub k: usize,
    /// Step size of the passive baseline.
    pub tau: f64,
    /// Neumann truncation point `T`.
    pub neumann_terms: usize,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.05,
            gamma: 0.05,
            delta: 0.8,
            k: 2,
            tau: 0.5,
            neumann_terms: 32,
        }
    }
}

impl DiffusionParams {
    /// Params with the given source/propagation weights and default controls.
    pub fn with_weights(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            gamma,
            delta,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)];
        for (name, w) in weights {
            if !(0.0..1.0).contains(&w) {
                return Err(Error::InvalidParameter(format!("{name} = {w} must lie in [0, 1)")));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta = {} must lie in (0, 1)",
                self.delta
            )));
        }
        let sum = self.alpha + self.beta + self.gamma + self.delta;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "alpha + beta + gamma + delta = {sum}, must equal 1"
            )));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidParameter(format!("tau = {} must lie in (0, 1)", self.tau)));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(())
    }

    /// A-priori Neumann truncation bound `δ^{T+1}/(1 − δ)`, relative to ‖S‖_F.
    pub fn neumann_error_bound(&self) -> f64 {
        neumann_error_bound(self.delta, self.neumann_terms)
    }
}

pub fn neumann_error_bound(delta: f64, terms: usize) -> f64 {
    delta.powi(terms as i32 + 1) / (1.0 - delta)
}

fn scalar<T: NdFloat>(v: f64) -> T {
    T::from(v).expect("representable scalar")
}

fn check_rows<T>(op: &'static str, bundle: &OperatorBundle, x: &ArrayView2<'_, T>) -> Result<()> {
    if x.nrows() != bundle.num_nodes() {
        return Err(Error::dims(op, format!("{} rows", bundle.num_nodes()), format!("{} rows", x.nrows())));
    }
    Ok(())
}

/// Row-stochastic operator `D̂⁻¹Â` for the passive baseline.
pub fn passive_operator(bundle: &OperatorBundle) -> Result<SparseOperator> {
    row_normalize(bundle.adjacency())
}

/// One explicit Euler step of passive diffusion, `Z ← (1 − τ)Z + τSZ`.
pub fn passive_step<T: NdFloat>(
    z: ArrayView2<'_, T>,
    op: &SparseOperator,
    tau: f64,
) -> Result<Array2<T>> {
    for (row, sum) in op.row_sums().into_iter().enumerate() {
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::NotRowNormalized { row, sum });
        }
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} must lie in (0, 1)")));
    }
    let propagated = op.spmm(z)?;
    let (keep, mix) = (scalar::<T>(1.0 - tau), scalar::<T>(tau));
    Ok(Zip::from(&z)
        .and(&propagated)
        .map_collect(|&old, &p| keep * old + mix * p))
}

/// The fixed source term `αX* + βL̂ÂX* + γL̂X*`.
pub fn source_term<T: NdFloat>(
    x_star: ArrayView2<'_, T>,
    bundle: &OperatorBundle,
    params: &DiffusionParams,
) -> Result<Array2<T>> {
    check_rows("source_term", bundle, &x_star)?;
    let mut source = x_star.mapv(|v| v * scalar::<T>(params.alpha));
    if params.beta != 0.0 {
        source.scaled_add(scalar(params.beta), &bundle.log_operator().spmm(x_star)?);
    }
    if params.gamma != 0.0 {
        source.scaled_add(scalar(params.gamma), &bundle.laplacian().spmm(x_star)?);
    }
    Ok(source)
}

/// One active-diffusion iteration `H⁽ᵏ⁺¹⁾ = S + δÂH⁽ᵏ⁾`.
pub fn active_step<T: NdFloat>(
    h: ArrayView2<'_, T>,
    source: ArrayView2<'_, T>,
    a_hat: &SparseOperator,
    delta: f64,
) -> Result<Array2<T>> {
    if h.dim() != source.dim() {
        return Err(Error::dims("active_step", format!("{:?}", source.dim()), format!("{:?}", h.dim())));
    }
    let propagated = a_hat.spmm(h)?;
    let delta = scalar::<T>(delta);
    Ok(Zip::from(&source)
        .and(&propagated)
        .map_collect(|&s, &p| s + delta * p))
}

/// `H⁽ᴷ⁾` from a precomputed source: K active steps from `H⁽⁰⁾ = X*`.
pub fn local_from_source<T: NdFloat>(
    x_star: ArrayView2<'_, T>,
    source: ArrayView2<'_, T>,
    bundle: &OperatorBundle,
    params: &DiffusionParams,
) -> Result<Array2<T>> {
    if params.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let mut h = x_star.to_owned();
    for _ in 0..params.k {
        h = active_step(h.view(), source, bundle.adjacency(), params.delta)?;
    }
    Ok(h)
}

/// Local embeddings `H⁽ᴷ⁾`.
pub fn diffuse_local<T: NdFloat>(
    x_star: ArrayView2<'_, T>,
    bundle: &OperatorBundle,
    params: &DiffusionParams,
) -> Result<Array2<T>> {
    let source = source_term(x_star, bundle, params)?;
    local_from_source(x_star, source.view(), bundle, params)
}

fn check_delta(bundle: &OperatorBundle, params: &DiffusionParams) -> Result<()> {
    if bundle.delta() != params.delta {
        return Err(Error::InvalidParameter(format!(
            "bundle was precomputed for delta = {}, params have delta = {}",
            bundle.delta(),
            params.delta
        )));
    }
    Ok(())
}

/// Global embeddings `H* = (I − δÂ)⁻¹S` by the bundle's dense factorization.
pub fn diffuse_global_dense<T: NdFloat>(
    x_star: ArrayView2<'_, T>,
    bundle: &OperatorBundle,
    params: &DiffusionParams,
) -> Result<Array2<T>> {
    check_delta(bundle, params)?;
    let solver = bundle.dense_solver().ok_or_else(|| {
        Error::FactorizationUnavailable(format!("{} nodes, Neumann bundle", bundle.num_nodes()))
    })?;
    let source = source_term(x_star, bundle, params)?;
    solver.solve(source.view())
}

/// Global embeddings by the truncated series `Σ_{t=0}^{T}(δÂ)ᵗ S`.
pub fn diffuse_global_neumann<T: NdFloat>(
    x_star: ArrayView2<'_, T>,
    bundle: &OperatorBundle,
    params: &DiffusionParams,
) -> Result<Array2<T>> {
    check_delta(bundle, params)?;
    let source = source_term(x_star, bundle, params)?;
    bundle.neumann_sum(source.view(), params.neumann_terms)
}

/// Global embeddings through whichever solver the bundle carries.
pub fn diffuse_global<T: NdFloat>(
    x_star: ArrayView2<'_, T>,
    bundle: &OperatorBundle,
    params: &DiffusionParams,
) -> Result<Array2<T>> {
    match bundle.global_solver() {
        GlobalSolver::Dense(_) => diffuse_global_dense(x_star, bundle, params),
        GlobalSolver::Neumann { .. } => diffuse_global_neumann(x_star, bundle, params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_core::{precompute_operators, BundleOptions, Graph, LaplacianMode};
    use crate::testutil::{dense_power, frob, frob_diff, random_graph, random_matrix};
    use ndarray::{array, Array2};

    fn bundle_for(g: &Graph, p: &DiffusionParams) -> OperatorBundle {
        precompute_operators(g, p, &BundleOptions::default()).unwrap()
    }

    fn k3() -> Graph {
        Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn ring(n: usize) -> Graph {
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(DiffusionParams::default().validate().is_ok());
        assert!(DiffusionParams::with_weights(0.3, 0.3, 0.3, 0.3).is_err());
        assert!(DiffusionParams::with_weights(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(DiffusionParams::with_weights(1.0, 0.0, 0.0, 0.0).is_err());
        assert!(DiffusionParams::with_weights(0.5, 0.0, 0.0, 0.5).is_ok());
        let bad_tau = DiffusionParams { tau: 1.0, ..DiffusionParams::default() };
        assert!(bad_tau.validate().is_err());
    }

    #[test]
    fn passive_constant_rows_are_fixed() {
        let p = DiffusionParams::default();
        let b = bundle_for(&ring(6), &p);
        let s = passive_operator(&b).unwrap();
        let z = Array2::from_shape_fn((6, 2), |(_, j)| j as f64 + 0.5);
        let next = passive_step(z.view(), &s, 0.5).unwrap();
        assert!(frob_diff(&next, &z) < 1e-15);
    }

    #[test]
    fn passive_near_unit_tau_approaches_propagation() {
        let b = bundle_for(&ring(5), &DiffusionParams::default());
        let s = passive_operator(&b).unwrap();
        let z = random_matrix(5, 3, 1);
        let tau = 1.0 - 1e-9;
        let next = passive_step(z.view(), &s, tau).unwrap();
        // (1 − τ)Z + τSZ − SZ = (1 − τ)(Z − SZ)
        let sz = s.spmm(z.view()).unwrap();
        let expected_gap = frob_diff(&z, &sz) * (1.0 - tau);
        assert!((frob_diff(&next, &sz) - expected_gap).abs() < 1e-12);
    }

    #[test]
    fn passive_ring_matches_dense_formula() {
        let b = bundle_for(&ring(4), &DiffusionParams::default());
        let s = passive_operator(&b).unwrap();
        let z = random_matrix(4, 3, 2);
        let next = passive_step(z.view(), &s, 0.3).unwrap();
        let oracle = &z * 0.7 + &(s.to_dense().dot(&z) * 0.3);
        assert!(frob_diff(&next, &oracle) < 1e-14);
    }

    #[test]
    fn passive_rejects_unnormalized_operator() {
        let b = bundle_for(&Graph::new(3, [(0, 1), (1, 2)]).unwrap(), &DiffusionParams::default());
        let z = random_matrix(3, 1, 3);
        assert!(matches!(
            passive_step(z.view(), b.adjacency(), 0.5),
            Err(Error::NotRowNormalized { .. })
        ));
    }

    #[test]
    fn source_reduces_to_ego_term() {
        let p = DiffusionParams::with_weights(0.4, 0.0, 0.0, 0.6).unwrap();
        let b = bundle_for(&ring(5), &p);
        let x = random_matrix(5, 2, 4);
        let s = source_term(x.view(), &b, &p).unwrap();
        assert!(frob_diff(&s, &(&x * 0.4)) < 1e-15);

        let p = DiffusionParams::with_weights(0.2, 0.3, 0.1, 0.4).unwrap();
        let single = bundle_for(&Graph::isolated(1), &p);
        let x1 = array![[2.5, -1.0]];
        assert_eq!(source_term(x1.view(), &single, &p).unwrap(), &x1 * 0.2);
    }

    #[test]
    fn source_triangle_matches_dense_oracle() {
        let p = DiffusionParams::with_weights(0.2, 0.2, 0.2, 0.4).unwrap();
        let b = bundle_for(&k3(), &p);
        let x = random_matrix(3, 4, 5);
        let a = b.adjacency().to_dense();
        let l = b.laplacian().to_dense();
        let oracle = &x * 0.2 + &(l.dot(&a).dot(&x) * 0.2) + &(l.dot(&x) * 0.2);
        let s = source_term(x.view(), &b, &p).unwrap();
        assert!(frob_diff(&s, &oracle) < 1e-14);
    }

    #[test]
    fn source_rejects_wrong_rows() {
        let p = DiffusionParams::default();
        let b = bundle_for(&k3(), &p);
        let x = random_matrix(4, 2, 6);
        assert!(source_term(x.view(), &b, &p).is_err());
    }

    #[test]
    fn active_step_from_zero_returns_source() {
        let p = DiffusionParams::default();
        let b = bundle_for(&ring(5), &p);
        let s = random_matrix(5, 2, 7);
        let h = Array2::zeros((5, 2));
        assert_eq!(active_step(h.view(), s.view(), b.adjacency(), 0.8).unwrap(), s);
    }

    #[test]
    fn active_step_single_node_scalar() {
        let p = DiffusionParams::with_weights(0.5, 0.0, 0.0, 0.5).unwrap();
        let b = bundle_for(&Graph::isolated(1), &p);
        let x = array![[2.0]];
        let s = source_term(x.view(), &b, &p).unwrap();
        let h1 = active_step(x.view(), s.view(), b.adjacency(), 0.5).unwrap();
        assert_eq!(h1, array![[2.0]]);
    }

    #[test]
    fn active_step_rejects_shape_mismatch() {
        let b = bundle_for(&ring(3), &DiffusionParams::default());
        let h = Array2::<f64>::zeros((3, 2));
        let s = Array2::<f64>::zeros((3, 1));
        assert!(active_step(h.view(), s.view(), b.adjacency(), 0.5).is_err());
    }

    /// Σ_{t<k}(δÂ)ᵗS + (δÂ)ᵏX*, evaluated with dense matrix powers.
    fn expansion_oracle(b: &OperatorBundle, p: &DiffusionParams, x: &Array2<f64>, k: usize) -> Array2<f64> {
        let a = b.adjacency().to_dense();
        let l = b.laplacian().to_dense();
        let s = x * p.alpha + &(l.dot(&a).dot(x) * p.beta) + &(l.dot(x) * p.gamma);
        let m = &a * p.delta;
        let mut out = dense_power(&m, k).dot(x);
        for t in 0..k {
            out = out + dense_power(&m, t).dot(&s);
        }
        out
    }

    #[test]
    fn three_ring_steps_match_expansion() {
        let p = DiffusionParams::with_weights(0.3, 0.1, 0.2, 0.4).unwrap();
        let b = bundle_for(&ring(7), &p);
        let x = random_matrix(7, 3, 8);
        let p3 = DiffusionParams { k: 3, ..p };
        let h = diffuse_local(x.view(), &b, &p3).unwrap();
        let oracle = expansion_oracle(&b, &p3, &x, 3);
        assert!(frob_diff(&h, &oracle) <= 1e-12 * frob(&oracle));
    }

    #[test]
    fn local_single_step_and_constant_rows() {
        let p = DiffusionParams { k: 1, ..DiffusionParams::with_weights(0.3, 0.0, 0.0, 0.7).unwrap() };
        let b = bundle_for(&ring(5), &p);
        let x = random_matrix(5, 2, 9);
        let h = diffuse_local(x.view(), &b, &p).unwrap();
        let expected = &x * 0.3 + &(b.adjacency().spmm(x.view()).unwrap() * 0.7);
        assert!(frob_diff(&h, &expected) < 1e-15);

        let pk = DiffusionParams { k: 6, ..p };
        let bk = bundle_for(&k3(), &pk);
        let xc = Array2::from_shape_fn((3, 2), |(_, j)| 1.5 - j as f64);
        let hk = diffuse_local(xc.view(), &bk, &pk).unwrap();
        for j in 0..2 {
            assert!((hk[[0, j]] - hk[[1, j]]).abs() < 1e-14);
            assert!((hk[[0, j]] - hk[[2, j]]).abs() < 1e-14);
        }
    }

    #[test]
    fn local_random_graph_matches_expansion() {
        let g = random_graph(20, 4.0, 10);
        let p = DiffusionParams { k: 5, ..DiffusionParams::with_weights(0.2, 0.15, 0.1, 0.55).unwrap() };
        for mode in [LaplacianMode::PaperDegree, LaplacianMode::IdentityDegree] {
            let b = precompute_operators(&g, &p, &BundleOptions::default().with_laplacian(mode)).unwrap();
            let x = random_matrix(20, 4, 11);
            let h = diffuse_local(x.view(), &b, &p).unwrap();
            let oracle = expansion_oracle(&b, &p, &x, 5);
            assert!(frob_diff(&h, &oracle) <= 1e-10 * frob(&oracle));
        }
    }

    #[test]
    fn global_dense_trivial_cases() {
        let p = DiffusionParams::with_weights(0.5, 0.0, 0.0, 0.5).unwrap();
        let single = bundle_for(&Graph::isolated(1), &p);
        let h = diffuse_global_dense(array![[2.0]].view(), &single, &p).unwrap();
        assert_eq!(h, array![[2.0]]);

        let empty = bundle_for(&Graph::isolated(3), &p);
        let x = random_matrix(3, 2, 12);
        assert_eq!(diffuse_global_dense(x.view(), &empty, &p).unwrap(), x);
    }

    #[test]
    fn global_dense_matches_long_iteration() {
        let g = random_graph(50, 5.0, 13);
        let p = DiffusionParams::with_weights(0.25, 0.1, 0.15, 0.5).unwrap();
        let b = bundle_for(&g, &p);
        let x = random_matrix(50, 3, 14);
        let hs = diffuse_global_dense(x.view(), &b, &p).unwrap();
        let long = DiffusionParams { k: 5000, ..p };
        let hk = diffuse_local(x.view(), &b, &long).unwrap();
        assert!(frob_diff(&hs, &hk) <= 1e-8 * frob(&hs));

        let source = source_term(x.view(), &b, &p).unwrap();
        let system = b.adjacency().to_dense() * -0.5 + Array2::<f64>::eye(50);
        let residual = frob_diff(&system.dot(&hs), &source) / frob(&source);
        assert!(residual <= 1e-10, "residual {residual}");
    }

    #[test]
    fn global_dense_requires_factorization() {
        let p = DiffusionParams::default();
        let opts = BundleOptions::default().with_solver(crate::graph_core::SolverChoice::Neumann);
        let b = precompute_operators(&ring(4), &p, &opts).unwrap();
        let x = random_matrix(4, 1, 15);
        assert!(matches!(
            diffuse_global_dense(x.view(), &b, &p),
            Err(Error::FactorizationUnavailable(_))
        ));
        let other = DiffusionParams::with_weights(0.5, 0.0, 0.0, 0.5).unwrap();
        let bd = bundle_for(&ring(4), &p);
        assert!(diffuse_global_dense(x.view(), &bd, &other).is_err());
    }

    #[test]
    fn neumann_trivial_cases() {
        let p = DiffusionParams { neumann_terms: 0, ..DiffusionParams::default() };
        let b = bundle_for(&ring(5), &p);
        let x = random_matrix(5, 2, 16);
        let source = source_term(x.view(), &b, &p).unwrap();
        assert_eq!(diffuse_global_neumann(x.view(), &b, &p).unwrap(), source);

        let p1 = DiffusionParams::with_weights(0.5, 0.0, 0.0, 0.5).unwrap();
        let single = bundle_for(&Graph::isolated(1), &p1);
        let sum = single.neumann_sum(array![[1.0]].view(), 3).unwrap();
        assert_eq!(sum, array![[1.875]]);
    }

    #[test]
    fn neumann_matches_dense_at_sixty_four_terms() {
        let g = random_graph(50, 5.0, 17);
        let p = DiffusionParams { neumann_terms: 64, ..DiffusionParams::with_weights(0.3, 0.1, 0.1, 0.5).unwrap() };
        let b = bundle_for(&g, &p);
        let x = random_matrix(50, 3, 18);
        let dense = diffuse_global_dense(x.view(), &b, &p).unwrap();
        let neumann = diffuse_global_neumann(x.view(), &b, &p).unwrap();
        let max_abs = dense.iter().zip(&neumann).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max_abs <= 1e-10, "{max_abs}");
    }

    #[test]
    fn error_bound_values() {
        assert_eq!(neumann_error_bound(0.5, 0), 1.0);
        assert!((neumann_error_bound(0.5, 64) - 0.5f64.powi(65) / 0.5).abs() < 1e-30);
        assert!(neumann_error_bound(0.5, 64) < 6e-20);
    }
}
