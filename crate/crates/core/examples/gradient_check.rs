//! Backpropagated gradients against central differences, per tensor.

use adgnn::diffusion::DiffusionParams;
use adgnn::graph_core::{precompute_operators, BundleOptions, Graph};
use adgnn::model::{ce_loss_from_logits, Head, ModelParams, Pipeline};
use ndarray::Array2;

fn main() -> adgnn::Result<()> {
    let n = 8;
    let graph = Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)).chain([(0, 4)]))?;
    let dp = DiffusionParams::default();
    let bundle = precompute_operators(&graph, &dp, &BundleOptions::default())?;
    let x = Array2::from_shape_fn((n, 3), |(i, j)| ((i * 5 + j * 11) % 7) as f64 / 7.0 - 0.4);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let mask = vec![true; n];
    let weights = vec![1.0; n];
    for head in [Head::Hadamard, Head::Mlp] {
        let pipe = Pipeline::new(&bundle, dp, head)?;
        let mut params = ModelParams::<f64>::init(3, 4, 2, head, 5);
        let cache = pipe.forward(x.view(), &params, None)?;
        pipe.backward(&cache, &labels, &mask, &mut params)?;
        let loss = |p: &ModelParams<f64>| -> adgnn::Result<f64> {
            let c = pipe.forward(x.view(), p, None)?;
            ce_loss_from_logits(c.logits().view(), &labels, &weights)
        };
        println!("{head} head:");
        let names: Vec<&str> = params.tensors().iter().map(|(name, _)| *name).collect();
        for name in names {
            let value = params.get(name).unwrap().value.clone();
            let grad = params.get(name).unwrap().grad.clone();
            let mut worst: f64 = 0.0;
            for idx in 0..value.len() {
                let at = (idx / value.ncols(), idx % value.ncols());
                let mut probe = params.clone();
                let (mut up, mut down) = (value.clone(), value.clone());
                up[at] += 1e-6;
                down[at] -= 1e-6;
                probe.set(name, up)?;
                let lu = loss(&probe)?;
                probe.set(name, down)?;
                let ld = loss(&probe)?;
                worst = worst.max(((lu - ld) / 2e-6 - grad[at]).abs());
            }
            println!("  {name:<5} max |numeric - analytic| = {worst:.2e}");
        }
    }
    Ok(())
}
