//! Canonical operators of a small graph in both Laplacian modes.

use adgnn::diffusion::DiffusionParams;
use adgnn::graph_core::{precompute_operators, BundleOptions, Graph, LaplacianMode};
use ndarray::Array2;

fn show(name: &str, m: &Array2<f64>) {
    println!("{name}:");
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:8.4}")).collect();
        println!("  {}", cells.join(" "));
    }
}

fn main() -> adgnn::Result<()> {
    // Path 0-1-2 with a pendant 3 on node 1.
    let graph = Graph::new(4, [(0, 1), (1, 2), (1, 3)])?;
    for mode in [LaplacianMode::PaperDegree, LaplacianMode::IdentityDegree] {
        let options = BundleOptions::default().with_laplacian(mode);
        let bundle = precompute_operators(&graph, &DiffusionParams::default(), &options)?;
        println!("== {} ==", mode.as_str());
        show("A_hat", &bundle.adjacency().to_dense());
        show("L_hat", &bundle.laplacian().to_dense());
        show("L_hat A_hat", &bundle.log_operator().to_dense());
        println!("A_hat row sums: {:?}", bundle.adjacency().row_sums());
    }
    Ok(())
}
