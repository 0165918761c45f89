//! Truncated Neumann series against the dense solve, with the a-priori bound.

use adgnn::diffusion::{neumann_error_bound, source_term, DiffusionParams};
use adgnn::graph_core::{precompute_operators, BundleOptions, Graph, SolverChoice};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn main() -> adgnn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 200;
    let edges: Vec<(usize, usize)> = (0..3 * n).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect();
    let graph = Graph::new(n, edges)?;
    let x = Array2::from_shape_simple_fn((n, 4), || rng.random_range(-1.0..1.0));
    for delta in [0.3, 0.5, 0.8] {
        let rest = 1.0 - delta;
        let dp = DiffusionParams { alpha: 0.5 * rest, beta: 0.25 * rest, gamma: 0.25 * rest, delta, ..DiffusionParams::default() };
        let bundle = precompute_operators(&graph, &dp, &BundleOptions::default().with_solver(SolverChoice::Dense))?;
        let s = source_term(x.view(), &bundle, &dp)?;
        let exact = bundle.apply_global(s.view())?;
        println!("delta = {delta}");
        for terms in [0, 4, 16, 32, 64] {
            let approx = bundle.neumann_sum(s.view(), terms)?;
            let err = frob(&(&approx - &exact)) / frob(&s);
            println!("  T = {terms:>2}: relative error {err:.3e}, bound {:.3e}", neumann_error_bound(delta, terms));
        }
    }
    Ok(())
}
