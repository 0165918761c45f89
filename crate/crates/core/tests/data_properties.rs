mod common;

use adgnn::data::{
    dirichlet_energy, edge_homophily, load_dataset, make_split, save_dataset, trace_energy, Dataset, SplitSpec,
};
use adgnn::diffusion::DiffusionParams;
use adgnn::graph_core::{precompute_operators, BundleOptions, Graph, LaplacianMode};
use proptest::prelude::*;

use common::{random_dataset, random_matrix};

/// Circulant graph: node `i` joined to `i ± s` for every stride `s`.
fn circulant(n: usize, strides: &[usize]) -> Graph {
    let edges = (0..n).flat_map(|i| strides.iter().map(move |&s| (i, (i + s) % n)));
    Graph::new(n, edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn save_then_load_is_identity(
        n in 9usize..=60,
        dim in 1usize..=5,
        classes in 1usize..=3,
        seed in 0u64..10_000,
        with_split in any::<bool>(),
    ) {
        let mut dataset: Dataset = random_dataset(n, 3.0, dim, classes, seed);
        if with_split {
            dataset = make_split(&dataset, &SplitSpec { seed, ..SplitSpec::default() }).unwrap();
        }
        let tmp = tempfile::tempdir().unwrap();
        save_dataset(&dataset, tmp.path()).unwrap();
        let mut back = load_dataset(tmp.path()).unwrap();
        back.name = dataset.name.clone();
        prop_assert_eq!(back, dataset);
    }

    #[test]
    fn pairwise_and_trace_energy_agree_on_regular_graphs(
        n in 5usize..=40,
        strides in prop::collection::btree_set(1usize..=2, 1..=2),
        seed in 0u64..10_000,
    ) {
        let strides: Vec<usize> = strides.into_iter().collect();
        let graph = circulant(n, &strides);
        let options = BundleOptions::default().with_laplacian(LaplacianMode::IdentityDegree);
        let bundle = precompute_operators(&graph, &DiffusionParams::default(), &options).unwrap();
        let z = random_matrix(n, 3, seed);
        let pairwise = dirichlet_energy(z.view(), &bundle).unwrap();
        let trace = trace_energy(z.view(), bundle.laplacian()).unwrap();
        prop_assert!((pairwise - trace).abs() <= 1e-10 * trace.abs().max(1e-300));
    }

    #[test]
    fn homophily_lies_in_unit_interval(n in 2usize..=50, seed in 0u64..10_000) {
        let d = random_dataset(n, 4.0, 1, 3, seed);
        if d.graph.num_edges() > 0 {
            let h = edge_homophily(&d.graph, &d.labels).unwrap();
            prop_assert!((0.0..=1.0).contains(&h));
        }
    }
}
