//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use adgnn::cli::RunConfig;
use adgnn::data::{save_dataset, Dataset};
use adgnn::graph_core::Graph;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Erdős–Rényi graph with the given expected mean degree.
pub fn random_graph(n: usize, mean_degree: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = (mean_degree / (n.max(2) - 1) as f64).min(1.0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

/// Entries uniform in [-1, 1).
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

pub fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn frob_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Random graph with uniform features and labels `i mod classes`.
pub fn random_dataset(n: usize, mean_degree: f64, dim: usize, classes: usize, seed: u64) -> Dataset {
    let labels = (0..n).map(|i| i % classes).collect();
    Dataset::new(
        format!("random-{seed}"),
        random_graph(n, mean_degree, seed),
        random_matrix(n, dim, seed ^ 0x5eed),
        labels,
        classes,
    )
    .unwrap()
}

pub fn write_dataset(dataset: &Dataset, dir: &Path) {
    save_dataset(dataset, dir).unwrap();
}

/// Config reading `dataset` and writing into `out`, with `pairs` applied.
pub fn config(dataset: &Path, out: &Path, pairs: &[(&str, &str)]) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.set("dataset", dataset.to_str().unwrap()).unwrap();
    cfg.set("output_dir", out.to_str().unwrap()).unwrap();
    for (k, v) in pairs {
        cfg.set(k, v).unwrap();
    }
    cfg
}
