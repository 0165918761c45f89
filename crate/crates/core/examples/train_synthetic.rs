//! Train on a separable block-model dataset, checkpoint, reload and evaluate.

use adgnn::data::{gen_synthetic, make_split, SplitSpec, SynthSpec};
use adgnn::diffusion::DiffusionParams;
use adgnn::graph_core::{precompute_operators, BundleOptions};
use adgnn::model::{evaluate, train, Checkpoint, Head, Pipeline, TrainConfig};

fn main() -> adgnn::Result<()> {
    let split = SplitSpec::default();
    let dataset = make_split(&gen_synthetic(&SynthSpec::new(400, 4, 0.9, 16, 2.0, 1))?, &split)?;
    let dp = DiffusionParams::default();
    let bundle = precompute_operators(&dataset.graph, &dp, &BundleOptions::default())?;
    for head in [Head::Hadamard, Head::Mlp] {
        let cfg = TrainConfig { head, max_epochs: 100, patience: 50, hidden_dim: 16, ..TrainConfig::default() };
        let pipe = Pipeline::new(&bundle, dp, head)?;
        let outcome = train::<f64>(&dataset, &pipe, &cfg)?;
        let splits = dataset.splits()?;
        println!(
            "{head}: best epoch {}, test accuracy {:.4}, {} parameters",
            outcome.best_epoch,
            evaluate(&dataset, &pipe, &outcome.params, &splits.test)?,
            outcome.params.num_parameters()
        );

        let path = std::env::temp_dir().join(format!("adgnn-example-{head}.json"));
        Checkpoint::new(&outcome.params, &cfg, &dp, &bundle, Some(split)).save(&path)?;
        let restored = Checkpoint::load(&path)?.params::<f64>(dataset.feature_dim(), dataset.num_classes)?;
        println!("  reloaded test accuracy {:.4}", evaluate(&dataset, &pipe, &restored, &splits.test)?);
        std::fs::remove_file(&path).ok();
    }
    Ok(())
}
