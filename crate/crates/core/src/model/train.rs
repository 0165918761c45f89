use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, NdFloat, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

use super::layers::{accuracy, ce_loss_from_logits};
use super::params::{Head, ModelParams, Param};
use super::pipeline::{Dropout, Pipeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(Error::Config(format!("unknown precision `{other}` (expected f32 or f64)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Dropout on `X*`; disabled at evaluation.
    pub dropout: f64,
    pub head: Head,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            max_epochs: 500,
            patience: 100,
            dropout: 0.5,
            head: Head::Hadamard,
            seed: 0,
            precision: Precision::F64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::InvalidParameter("hidden_dim must be positive".into()));
        }
        // Zero is allowed: it freezes the parameters.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning_rate = {} must be >= 0", self.learning_rate)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidParameter(format!("weight_decay = {} must be >= 0", self.weight_decay)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParameter(format!("dropout = {} must lie in [0, 1)", self.dropout)));
        }
        if self.patience > self.max_epochs {
            return Err(Error::InvalidParameter(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}

/// Metrics after one epoch's update, all in evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training cross-entropy summed over the train mask.
    pub loss: f64,
    pub train_acc: f64,
    pub valid_acc: Option<f64>,
    pub test_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters from the best-validation epoch.
    pub params: ModelParams<T>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Adaptive moments with decoupled weight decay (biases are not decayed).
#[derive(Debug, Clone)]
pub struct AdamW<T> {
    lr: f64,
    weight_decay: f64,
    step: i32,
    moments: Vec<(Array2<T>, Array2<T>)>,
}

impl<T: NdFloat> AdamW<T> {
    pub fn new(params: &ModelParams<T>, lr: f64, weight_decay: f64) -> Self {
        let moments = params
            .tensors()
            .iter()
            .map(|(_, p)| (Array2::zeros(p.value.raw_dim()), Array2::zeros(p.value.raw_dim())))
            .collect();
        Self {
            lr,
            weight_decay,
            step: 0,
            moments,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams<T>) {
        self.step += 1;
        let c = |v: f64| T::from(v).expect("representable");
        let (b1, b2) = (c(BETA1), c(BETA2));
        let correct1 = c(1.0 - BETA1.powi(self.step));
        let correct2 = c(1.0 - BETA2.powi(self.step));
        let (lr, eps) = (c(self.lr), c(ADAM_EPS));
        for ((name, p), (m, v)) in params.tensors_mut().into_iter().zip(&mut self.moments) {
            let decay = if Param::<T>::decays(name) { c(self.lr * self.weight_decay) } else { T::zero() };
            Zip::from(&mut p.value).and(&p.grad).and(m).and(v).for_each(|w, &g, m, v| {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let update = (*m / correct1) / ((*v / correct2).sqrt() + eps);
                *w = *w - lr * update - decay * *w;
            });
        }
        params.bump();
    }
}

pub(crate) fn cast_features<T: NdFloat>(features: &Array2<f64>) -> Array2<T> {
    features.mapv(|v| T::from(v).expect("representable feature"))
}

fn mask_weights(mask: &[bool]) -> Vec<f64> {
    mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect()
}

fn optional_accuracy<T: NdFloat>(probs: &Array2<T>, labels: &[usize], mask: &[bool]) -> Result<Option<f64>> {
    if mask.iter().any(|&m| m) {
        accuracy(probs.view(), labels, mask).map(Some)
    } else {
        Ok(None)
    }
}

/// Full-batch training with early stopping on validation accuracy.
///
/// Model selection uses validation accuracy when the valid mask is
/// non-empty and training accuracy otherwise. Equal accuracy is broken by
/// lower cross-entropy on the same mask; exact ties keep the earlier epoch.
pub fn train<T: NdFloat>(dataset: &Dataset, pipeline: &Pipeline<'_>, cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if cfg.head != pipeline.head() {
        return Err(Error::InvalidParameter(format!(
            "config head {} differs from pipeline head {}",
            cfg.head,
            pipeline.head()
        )));
    }
    let splits = dataset.splits()?;
    if !splits.train.iter().any(|&m| m) {
        return Err(Error::EmptyTrainingMask);
    }
    let x = cast_features::<T>(&dataset.features);
    let labels = &dataset.labels;
    let train_weights = mask_weights(&splits.train);
    let select_weights = if splits.valid.iter().any(|&m| m) {
        mask_weights(&splits.valid)
    } else {
        train_weights.clone()
    };
    let mut params = ModelParams::<T>::init(dataset.feature_dim(), cfg.hidden_dim, dataset.num_classes, cfg.head, cfg.seed);
    let mut optimizer = AdamW::new(&params, cfg.learning_rate, cfg.weight_decay);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(1);

    let mut history = Vec::with_capacity(cfg.max_epochs);
    let mut best: Option<((f64, f64), usize, ModelParams<T>)> = None;
    let mut since_best = 0;
    for epoch in 0..cfg.max_epochs {
        let cache = pipeline.forward(
            x.view(),
            &params,
            Some(Dropout {
                rate: cfg.dropout,
                rng: &mut dropout_rng,
            }),
        )?;
        let step_loss = pipeline.backward(&cache, labels, &splits.train, &mut params)?;
        if !step_loss.is_finite() {
            return Err(Error::Divergence { epoch, loss: step_loss });
        }
        optimizer.step(&mut params);
        if !params.all_finite() {
            return Err(Error::Divergence { epoch, loss: f64::NAN });
        }

        let eval = pipeline.forward(x.view(), &params, None)?;
        let loss = ce_loss_from_logits(eval.logits().view(), labels, &train_weights)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        let probs = eval.probabilities();
        let record = EpochRecord {
            epoch,
            loss,
            train_acc: accuracy(probs.view(), labels, &splits.train)?,
            valid_acc: optional_accuracy(probs, labels, &splits.valid)?,
            test_acc: optional_accuracy(probs, labels, &splits.test)?,
        };
        log::debug!(
            "epoch {epoch}: loss {loss:.6} train {:.4} valid {:?} test {:?}",
            record.train_acc,
            record.valid_acc,
            record.test_acc
        );
        history.push(record);

        let select_loss = ce_loss_from_logits(eval.logits().view(), labels, &select_weights)?;
        let score = (record.valid_acc.unwrap_or(record.train_acc), select_loss);
        let improved = |(acc, loss): (f64, f64)| score.0 > acc || (score.0 == acc && score.1 < loss);
        if best.as_ref().is_none_or(|(s, _, _)| improved(*s)) {
            best = Some((score, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let (_, best_epoch, params) = match best {
        Some(b) => b,
        None => ((f64::NAN, f64::NAN), 0, params),
    };
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
    })
}

/// Accuracy of `params` on the masked nodes (evaluation mode).
pub fn evaluate<T: NdFloat>(
    dataset: &Dataset,
    pipeline: &Pipeline<'_>,
    params: &ModelParams<T>,
    mask: &[bool],
) -> Result<f64> {
    let x = cast_features::<T>(&dataset.features);
    let probs = pipeline.predict(x.view(), params)?;
    accuracy(probs.view(), &dataset.labels, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, Splits};
    use crate::diffusion::DiffusionParams;
    use crate::graph_core::{precompute_operators, BundleOptions, Graph, OperatorBundle};

    /// Two homophilic 30-node blocks with class-aligned features.
    fn separable() -> Dataset {
        let n = 60;
        let labels: Vec<usize> = (0..n).map(|i| i / 30).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            let block = i / 30 * 30;
            edges.push((i, block + (i + 1) % 30));
            edges.push((i, block + (i + 7) % 30));
        }
        edges.push((0, 30));
        let graph = Graph::new(n, edges).unwrap();
        let features = Array2::from_shape_fn((n, 4), |(i, j)| {
            let sign = if labels[i] == 0 { 1.0 } else { -1.0 };
            sign * (1.0 + 0.1 * j as f64) + 0.05 * ((i * 7 + j * 3) % 11) as f64
        });
        let train: Vec<usize> = (0..n).filter(|i| i % 5 < 3).collect();
        let valid: Vec<usize> = (0..n).filter(|i| i % 5 == 3).collect();
        let test: Vec<usize> = (0..n).filter(|i| i % 5 == 4).collect();
        Dataset::new("separable", graph, features, labels, 2)
            .unwrap()
            .with_splits(Splits::from_indices(n, &train, &valid, &test).unwrap())
            .unwrap()
    }

    fn bundle(d: &Dataset) -> OperatorBundle {
        precompute_operators(&d.graph, &DiffusionParams::default(), &BundleOptions::default()).unwrap()
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            hidden_dim: 8,
            max_epochs: epochs,
            patience: epochs,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_reaches_full_train_accuracy() {
        let d = separable();
        let b = bundle(&d);
        let pipe = Pipeline::new(&b, DiffusionParams::default(), Head::Hadamard).unwrap();
        let out = train::<f64>(&d, &pipe, &cfg(200)).unwrap();
        assert!(out.history.iter().any(|r| r.train_acc == 1.0));
    }

    #[test]
    fn zero_learning_rate_freezes_everything() {
        let d = separable();
        let b = bundle(&d);
        let pipe = Pipeline::new(&b, DiffusionParams::default(), Head::Hadamard).unwrap();
        let c = TrainConfig { learning_rate: 0.0, ..cfg(5) };
        let out = train::<f64>(&d, &pipe, &c).unwrap();
        let init = ModelParams::<f64>::init(4, 8, 2, Head::Hadamard, 0);
        for ((_, a), (_, b)) in out.params.tensors().iter().zip(init.tensors()) {
            assert_eq!(a.value, b.value);
        }
        assert!(out.history.windows(2).all(|w| w[0].loss == w[1].loss));
    }

    #[test]
    fn same_seed_same_history() {
        let d = separable();
        let b = bundle(&d);
        let pipe = Pipeline::new(&b, DiffusionParams::default(), Head::Mlp).unwrap();
        let c = TrainConfig { head: Head::Mlp, ..cfg(15) };
        let a = train::<f64>(&d, &pipe, &c).unwrap();
        let b2 = train::<f64>(&d, &pipe, &c).unwrap();
        assert_eq!(a.history, b2.history);
    }

    #[test]
    fn small_learning_rate_loss_is_monotone() {
        let d = separable();
        let b = bundle(&d);
        let pipe = Pipeline::new(&b, DiffusionParams::default(), Head::Hadamard).unwrap();
        let c = TrainConfig { learning_rate: 1e-3, dropout: 0.0, ..cfg(10) };
        let out = train::<f64>(&d, &pipe, &c).unwrap();
        assert!(out.history.windows(2).all(|w| w[1].loss <= w[0].loss));
    }

    #[test]
    fn f32_training_runs() {
        let d = separable();
        let b = bundle(&d);
        let pipe = Pipeline::new(&b, DiffusionParams::default(), Head::Hadamard).unwrap();
        let c = TrainConfig { precision: Precision::F32, ..cfg(100) };
        let out = train::<f32>(&d, &pipe, &c).unwrap();
        assert!(out.history.iter().any(|r| r.train_acc == 1.0));
    }

    #[test]
    fn divergence_reports_epoch() {
        let d = separable();
        let b = bundle(&d);
        let pipe = Pipeline::new(&b, DiffusionParams::default(), Head::Hadamard).unwrap();
        let c = TrainConfig { learning_rate: 1e300, dropout: 0.0, ..cfg(20) };
        match train::<f64>(&d, &pipe, &c) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch < 20),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { dropout: 1.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { patience: 600, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: -1.0, ..TrainConfig::default() }.validate().is_err());
    }
}
