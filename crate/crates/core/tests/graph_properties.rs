mod common;

use adgnn::graph_core::{laplacian, normalize_sym, spmm, Graph, LaplacianMode, SparseOperator};
use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{frob, frob_diff, random_matrix};

fn graph_strategy(max_nodes: usize) -> impl Strategy<Value = Graph> {
    (1..=max_nodes).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n), 0..=3 * n).prop_map(move |edges| Graph::new(n, edges).unwrap())
    })
}

/// Power-iteration estimate of the largest |eigenvalue| of a symmetric operator.
fn spectral_radius(op: &SparseOperator) -> f64 {
    let n = op.rows();
    let mut v = Array2::from_shape_fn((n, 1), |(i, _)| 1.0 + (i % 5) as f64 * 0.1);
    let mut estimate = 0.0;
    for _ in 0..200 {
        let norm = frob(&v);
        v.mapv_inplace(|x| x / norm);
        // Squaring separates ±λ pairs.
        let w = spmm(op, spmm(op, v.view()).unwrap().view()).unwrap();
        estimate = frob(&w).sqrt();
        v = w;
    }
    estimate
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalized_adjacency_is_symmetric_and_contractive(g in graph_strategy(40)) {
        let a = normalize_sym(&g).unwrap();
        prop_assert_eq!(a.max_asymmetry(), 0.0);
        prop_assert!(spectral_radius(&a) <= 1.0 + 1e-9);
    }

    #[test]
    fn identity_degree_laplacian_is_positive_semidefinite(g in graph_strategy(50), seed in 0u64..1000) {
        let lap = laplacian(&normalize_sym(&g).unwrap(), LaplacianMode::IdentityDegree).unwrap();
        let x = random_matrix(g.num_nodes(), 1, seed);
        let lx = spmm(&lap, x.view()).unwrap();
        let quad: f64 = x.iter().zip(&lx).map(|(a, b)| a * b).sum();
        prop_assert!(quad >= -1e-9, "{}", quad);
    }

    #[test]
    fn spmm_is_linear(g in graph_strategy(30), a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
        let op = normalize_sym(&g).unwrap();
        let n = g.num_nodes();
        let (x, y) = (random_matrix(n, 4, seed), random_matrix(n, 4, seed + 1));
        let combined = &x * a + &y * b;
        let lhs = spmm(&op, combined.view()).unwrap();
        let rhs = spmm(&op, x.view()).unwrap() * a + spmm(&op, y.view()).unwrap() * b;
        prop_assert!(frob_diff(&lhs, &rhs) <= 1e-12 * frob(&rhs).max(1e-300) + 1e-300);
    }

    #[test]
    fn identity_spmm_is_bit_exact(n in 1usize..30, seed in 0u64..1000) {
        let x = random_matrix(n, 3, seed);
        prop_assert_eq!(spmm(&SparseOperator::identity(n), x.view()).unwrap(), x);
    }

    #[test]
    fn triplet_order_does_not_change_storage(g in graph_strategy(25), seed in any::<u64>()) {
        let op = normalize_sym(&g).unwrap();
        let mut triplets: Vec<_> = op.triplets().collect();
        triplets.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let rebuilt = SparseOperator::from_triplets(op.rows(), op.cols(), triplets).unwrap();
        prop_assert_eq!(rebuilt.row_offsets(), op.row_offsets());
        prop_assert_eq!(rebuilt.col_indices(), op.col_indices());
        prop_assert_eq!(rebuilt.values(), op.values());
    }
}
