//! The energy minimizer under mapped weights equals the infinite-diffusion embeddings.

use adgnn::diffusion::{diffuse_global_dense, DiffusionParams};
use adgnn::energy::{energy, energy_gradient, energy_minimizer, energy_minimizer_general, params_from_diffusion};
use adgnn::graph_core::{precompute_operators, BundleOptions, Graph, LaplacianMode};
use ndarray::Array2;

fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn main() -> adgnn::Result<()> {
    let graph = Graph::new(6, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3)])?;
    let x = Array2::from_shape_fn((6, 2), |(i, j)| (i as f64 - 2.5) * if j == 0 { 1.0 } else { -0.5 });
    let dp = DiffusionParams::with_weights(0.15, 0.05, 0.1, 0.7)?;
    let ep = params_from_diffusion(&dp);
    println!("lambda = {:.4}, epsilon = {:.4}, eta = {:.4}", ep.lambda, ep.epsilon, ep.eta);

    let identity = BundleOptions::default().with_laplacian(LaplacianMode::IdentityDegree);
    let bundle = precompute_operators(&graph, &dp, &identity)?;
    let h_hat = energy_minimizer(x.view(), &bundle, &ep)?;
    let h_star = diffuse_global_dense(x.view(), &bundle, &dp)?;
    println!("identity degree: ||H_hat - H*|| / ||H*|| = {:.3e}", frob(&(&h_hat - &h_star)) / frob(&h_star));
    println!("gradient norm at H_hat = {:.3e}", frob(&energy_gradient(h_hat.view(), x.view(), &bundle, &ep)?));
    println!("energy at H_hat = {:.6}, at X* = {:.6}", energy(h_hat.view(), x.view(), &bundle, &ep)?, energy(x.view(), x.view(), &bundle, &ep)?);

    // With the self-loop degree matrix the two stationary points differ.
    let paper = precompute_operators(&graph, &dp, &BundleOptions::default())?;
    let general = energy_minimizer_general(x.view(), &paper, &ep)?;
    let diffused = diffuse_global_dense(x.view(), &paper, &dp)?;
    println!("paper degree:    ||H_hat - H*|| / ||H*|| = {:.3e}", frob(&(&general - &diffused)) / frob(&diffused));
    Ok(())
}
