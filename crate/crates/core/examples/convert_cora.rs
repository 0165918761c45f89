//! Converts the LINQS Cora release (`cora.content`, `cora.cites`) into a
//! dataset directory readable by `adgnn`.
//!
//! Usage: `cargo run --example convert_cora -- <linqs-dir> <output-dir>`

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

use adgnn::data::{save_dataset, Dataset};
use adgnn::graph_core::Graph;
use adgnn::Error;
use ndarray::Array2;

fn read(path: &PathBuf) -> adgnn::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn main() -> adgnn::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [input, output] = args.as_slice() else {
        eprintln!("usage: convert_cora <linqs-dir> <output-dir>");
        std::process::exit(1);
    };
    let input = PathBuf::from(input);
    let content = read(&input.join("cora.content"))?;
    let cites = read(&input.join("cora.cites"))?;

    // Paper ids are mapped to rows in file order; classes sorted by name.
    let mut ids = HashMap::new();
    let mut rows = Vec::new();
    let mut class_names = Vec::new();
    for line in content.lines().filter(|l| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let (id, rest) = fields.split_first().expect("non-empty line");
        let (class, bits) = rest.split_last().expect("class column");
        ids.insert(id.to_string(), rows.len());
        rows.push((bits.iter().map(|b| b.parse::<f64>().unwrap_or(0.0)).collect::<Vec<_>>(), class.to_string()));
        class_names.push(class.to_string());
    }
    class_names.sort();
    class_names.dedup();
    let dim = rows.first().map_or(0, |r| r.0.len());
    let mut features = Array2::zeros((rows.len(), dim));
    let mut labels = Vec::with_capacity(rows.len());
    for (i, (bits, class)) in rows.iter().enumerate() {
        features.row_mut(i).assign(&ndarray::ArrayView1::from(bits));
        labels.push(class_names.binary_search(class).expect("known class"));
    }
    let mut edges = Vec::new();
    let mut dangling = 0;
    for line in cites.lines().filter(|l| !l.trim().is_empty()) {
        let pair: Vec<&str> = line.split_whitespace().collect();
        match (ids.get(pair[0]), pair.get(1).and_then(|p| ids.get(*p))) {
            (Some(&u), Some(&v)) => edges.push((u, v)),
            _ => dangling += 1,
        }
    }
    let graph = Graph::new(rows.len(), edges)?;
    let dataset = Dataset::new("cora", graph, features, labels, class_names.len())?;
    save_dataset(&dataset, output)?;
    println!(
        "{} nodes, {} edges ({dangling} citations skipped), {} features, {} classes, edge homophily {:.4}",
        dataset.num_nodes(),
        dataset.graph.num_edges(),
        dataset.feature_dim(),
        dataset.num_classes,
        dataset.homophily()?
    );
    Ok(())
}
