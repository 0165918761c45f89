use std::fs;
use std::path::Path;

use ndarray::{Array2, NdFloat};
use serde::{Deserialize, Serialize};

use crate::data::SplitSpec;
use crate::diffusion::DiffusionParams;
use crate::error::{Error, Result};
use crate::graph_core::{BundleOptions, LaplacianMode, OperatorBundle, SolverChoice};

use super::params::{Head, ModelParams};
use super::train::TrainConfig;

pub const CHECKPOINT_FORMAT: &str = "adgnn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// JSON container with every tensor plus the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    /// Split used in training when the dataset carried none.
    pub split: Option<SplitSpec>,
    pub laplacian: LaplacianMode,
    /// Resolved global solver, `dense` or `neumann`.
    pub solver: SolverChoice,
    pub config: TrainConfig,
    pub diffusion: DiffusionParams,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn new<T: NdFloat>(
        params: &ModelParams<T>,
        config: &TrainConfig,
        diffusion: &DiffusionParams,
        bundle: &OperatorBundle,
        split: Option<SplitSpec>,
    ) -> Self {
        let tensors = params
            .tensors()
            .into_iter()
            .map(|(name, p)| TensorRecord {
                name: name.to_string(),
                shape: [p.value.nrows(), p.value.ncols()],
                data: p.value.iter().map(|v| v.to_f64().expect("float")).collect(),
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            seed: config.seed,
            split,
            laplacian: bundle.laplacian_mode(),
            solver: bundle.solver_choice(),
            config: *config,
            diffusion: *diffusion,
            tensors,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint {
                name: "<header>".into(),
                msg: format!("unsupported format {} v{}", ck.format, ck.version),
            });
        }
        Ok(ck)
    }

    /// Bundle options reproducing the operators used in training.
    pub fn bundle_options(&self, dense_threshold: usize) -> BundleOptions {
        BundleOptions {
            laplacian: self.laplacian,
            dense_threshold,
            solver: self.solver,
        }
    }

    /// Rebuilds the parameters, checking every shape against a dataset with
    /// `feature_dim` columns and `num_classes` classes.
    pub fn params<T: NdFloat>(&self, feature_dim: usize, num_classes: usize) -> Result<ModelParams<T>> {
        let head: Head = self.config.head;
        let mut params = ModelParams::<T>::zeros(feature_dim, self.config.hidden_dim, num_classes, head);
        let expected: Vec<(&str, (usize, usize))> = params.tensors().iter().map(|(n, p)| (*n, p.shape())).collect();
        for (name, shape) in &expected {
            let record = self.tensors.iter().find(|t| t.name == *name).ok_or_else(|| Error::Checkpoint {
                name: name.to_string(),
                msg: "missing".into(),
            })?;
            let got = (record.shape[0], record.shape[1]);
            if got != *shape {
                return Err(Error::Checkpoint {
                    name: name.to_string(),
                    msg: format!("shape {got:?} does not match the dataset's {shape:?}"),
                });
            }
            let value = Array2::from_shape_vec(got, record.data.iter().map(|&v| T::from(v).expect("float")).collect())
                .map_err(|e| Error::Checkpoint {
                    name: name.to_string(),
                    msg: e.to_string(),
                })?;
            params.set(name, value)?;
        }
        if let Some(extra) = self.tensors.iter().find(|t| !expected.iter().any(|(n, _)| *n == t.name)) {
            return Err(Error::Checkpoint {
                name: extra.name.clone(),
                msg: format!("not used by the {head} head"),
            });
        }
        Ok(params)
    }
}
