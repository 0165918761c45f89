use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::dataset::{Dataset, Splits};

/// Fractions of nodes assigned to train, valid and test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub valid_frac: f64,
    pub test_frac: f64,
    pub per_class: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.48,
            valid_frac: 0.32,
            test_frac: 0.20,
            per_class: true,
            seed: 0,
        }
    }
}

// Tolerates fractions like 0.48 whose product with n lands just below an integer.
const ROUNDING_SLACK: f64 = 1e-9;

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("train_frac", self.train_frac),
            ("valid_frac", self.valid_frac),
            ("test_frac", self.test_frac),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidParameter(format!("{name} = {f} must lie in [0, 1]")));
            }
        }
        let sum = self.train_frac + self.valid_frac + self.test_frac;
        if sum > 1.0 + ROUNDING_SLACK {
            return Err(Error::InvalidParameter(format!("split fractions sum to {sum} > 1")));
        }
        Ok(())
    }

    fn covers_everything(&self) -> bool {
        self.train_frac + self.valid_frac + self.test_frac >= 1.0 - ROUNDING_SLACK
    }

    /// `(train, valid, test)` counts for a group of `n` nodes.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let take = |f: f64| ((f * n as f64) + ROUNDING_SLACK).floor() as usize;
        let train = take(self.train_frac).min(n);
        let valid = take(self.valid_frac).min(n - train);
        let test = if self.covers_everything() {
            n - train - valid
        } else {
            take(self.test_frac).min(n - train - valid)
        };
        (train, valid, test)
    }
}

/// Random split of `labels`, stratified by class when `spec.per_class` is set.
pub fn split_labels(labels: &[usize], num_classes: usize, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    let n = labels.len();
    let groups: Vec<Vec<usize>> = if spec.per_class {
        let mut groups = vec![Vec::new(); num_classes];
        for (i, &l) in labels.iter().enumerate() {
            groups[l].push(i);
        }
        if let Some((c, g)) = groups.iter().enumerate().find(|(_, g)| g.len() < 3) {
            return Err(Error::Dataset(format!(
                "class {c} has {} nodes; per-class splitting needs at least 3",
                g.len()
            )));
        }
        groups
    } else {
        vec![(0..n).collect()]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut splits = Splits {
        train: vec![false; n],
        valid: vec![false; n],
        test: vec![false; n],
    };
    for mut group in groups {
        group.shuffle(&mut rng);
        let (tr, va, te) = spec.counts(group.len());
        group[..tr].iter().for_each(|&i| splits.train[i] = true);
        group[tr..tr + va].iter().for_each(|&i| splits.valid[i] = true);
        group[tr + va..tr + va + te].iter().for_each(|&i| splits.test[i] = true);
    }
    Ok(splits)
}

/// Returns `dataset` with a fresh split drawn from `spec`.
pub fn make_split(dataset: &Dataset, spec: &SplitSpec) -> Result<Dataset> {
    let splits = split_labels(&dataset.labels, dataset.num_classes, spec)?;
    dataset.clone().with_splits(splits)
}
