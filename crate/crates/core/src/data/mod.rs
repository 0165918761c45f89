//! Datasets on disk, splits, the synthetic block-model generator and graph metrics.

mod dataset;
mod metrics;
mod split;
mod synth;

pub use dataset::{
    format_real, load_dataset, matrix_to_csv, read_matrix_csv, save_dataset, Dataset, Splits, EDGES_FILE,
    FEATURES_FILE, LABELS_FILE, SPLITS_FILE,
};
pub use metrics::{dirichlet_energy, edge_homophily, min_pairwise_distance, pairwise_energy, trace_energy};
pub use split::{make_split, split_labels, SplitSpec};
pub use synth::{block_label, gen_synthetic, SynthSpec, DEFAULT_MEAN_DEGREE, HOMOPHILY_TOLERANCE, MAX_ATTEMPTS};

/// Edge homophily of the dataset's graph under its labels.
pub fn homophily_ratio(dataset: &Dataset) -> crate::Result<f64> {
    dataset.homophily()
}
