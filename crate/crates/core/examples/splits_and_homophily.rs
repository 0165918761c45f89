//! Block-model graphs across the homophily range, and per-class splits.

use adgnn::data::{gen_synthetic, make_split, SynthSpec, SplitSpec};

fn main() -> adgnn::Result<()> {
    for target in [0.1, 0.22, 0.5, 0.81, 1.0] {
        let ds = gen_synthetic(&SynthSpec::new(600, 4, target, 8, 1.0, 0))?;
        println!("target {target:.2}: realized {:.3} over {} edges", ds.homophily()?, ds.graph.num_edges());
    }
    let ds = make_split(&gen_synthetic(&SynthSpec::new(100, 3, 0.8, 4, 1.0, 2))?, &SplitSpec::default())?;
    let splits = ds.splits()?;
    println!("split counts (train, valid, test): {:?}", splits.counts());
    for c in 0..ds.num_classes {
        let in_class = |mask: &[bool]| mask.iter().zip(&ds.labels).filter(|(&m, &l)| m && l == c).count();
        println!("class {c}: {} / {} / {}", in_class(&splits.train), in_class(&splits.valid), in_class(&splits.test));
    }
    Ok(())
}
