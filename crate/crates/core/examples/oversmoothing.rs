//! Passive diffusion collapses node rows; active diffusion keeps them apart.

use adgnn::data::{dirichlet_energy, gen_synthetic, min_pairwise_distance, SynthSpec};
use adgnn::diffusion::{active_step, passive_operator, passive_step, source_term, DiffusionParams};
use adgnn::graph_core::{precompute_operators, BundleOptions};

fn main() -> adgnn::Result<()> {
    let dataset = gen_synthetic(&SynthSpec::new(200, 2, 0.9, 16, 1.0, 11))?;
    let dp = DiffusionParams::default();
    let bundle = precompute_operators(&dataset.graph, &dp, &BundleOptions::default())?;
    let passive = passive_operator(&bundle)?;
    let x = &dataset.features;
    let source = source_term(x.view(), &bundle, &dp)?;
    let (mut z, mut h) = (x.clone(), x.clone());
    println!("{:>4} {:>12} {:>12} {:>12} {:>12}", "k", "E passive", "E active", "d passive", "d active");
    for k in 0..=200 {
        if k % 25 == 0 {
            println!(
                "{k:>4} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
                dirichlet_energy(z.view(), &bundle)?,
                dirichlet_energy(h.view(), &bundle)?,
                min_pairwise_distance(z.view()).unwrap_or(0.0),
                min_pairwise_distance(h.view()).unwrap_or(0.0),
            );
        }
        z = passive_step(z.view(), &passive, dp.tau)?;
        h = active_step(h.view(), source.view(), bundle.adjacency(), dp.delta)?;
    }
    Ok(())
}
