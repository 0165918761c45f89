//! Active diffusion iterates approach the closed-form limit geometrically.

use adgnn::diffusion::{active_step, diffuse_global_dense, source_term, DiffusionParams};
use adgnn::graph_core::{precompute_operators, BundleOptions, Graph};
use ndarray::Array2;

fn frob_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn main() -> adgnn::Result<()> {
    let n = 12;
    let graph = Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)).chain([(0, 6), (3, 9)]))?;
    let dp = DiffusionParams::default();
    let bundle = precompute_operators(&graph, &dp, &BundleOptions::default())?;
    let x = Array2::from_shape_fn((n, 3), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0);

    let source = source_term(x.view(), &bundle, &dp)?;
    let limit = diffuse_global_dense(x.view(), &bundle, &dp)?;
    let start = frob_diff(&x, &limit);
    let mut h = x.clone();
    println!("{:>4} {:>14} {:>14}", "k", "||H_k - H*||", "delta^k e_0");
    for k in 0..=40 {
        if k % 5 == 0 {
            println!("{k:>4} {:>14.6e} {:>14.6e}", frob_diff(&h, &limit), dp.delta.powi(k) * start);
        }
        h = active_step(h.view(), source.view(), bundle.adjacency(), dp.delta)?;
    }
    Ok(())
}
