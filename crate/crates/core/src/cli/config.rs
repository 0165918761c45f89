//! Flat `key = value` run configuration.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file, then
//! command-line flags. Lines starting with `#` and blank lines are ignored.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{format_real, SplitSpec, SynthSpec};
use crate::diffusion::DiffusionParams;
use crate::error::{Error, Result};
use crate::graph_core::{BundleOptions, LaplacianMode, SolverChoice};
use crate::model::{Head, Precision, TrainConfig};

/// What `diffuse` writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffuseMode {
    Source,
    Local,
    GlobalDense,
    GlobalNeumann,
}

impl DiffuseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiffuseMode::Source => "source",
            DiffuseMode::Local => "local",
            DiffuseMode::GlobalDense => "global-dense",
            DiffuseMode::GlobalNeumann => "global-neumann",
        }
    }
}

impl FromStr for DiffuseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(DiffuseMode::Source),
            "local" => Ok(DiffuseMode::Local),
            "global-dense" => Ok(DiffuseMode::GlobalDense),
            "global-neumann" => Ok(DiffuseMode::GlobalNeumann),
            other => Err(Error::Config(format!(
                "unknown diffuse mode `{other}` (expected source, local, global-dense or global-neumann)"
            ))),
        }
    }
}

/// Energy weights used by `energy-check`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyMapping {
    /// `λ = α/δ`, `ε = β/δ`, `η = γ/δ`.
    Mapped,
    /// `λ = α`, `ε = β`, `η = γ`; the recovery check is expected to fail.
    Unmapped,
}

impl EnergyMapping {
    pub fn as_str(self) -> &'static str {
        match self {
            EnergyMapping::Mapped => "mapped",
            EnergyMapping::Unmapped => "unmapped",
        }
    }
}

impl FromStr for EnergyMapping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mapped" => Ok(EnergyMapping::Mapped),
            "unmapped" => Ok(EnergyMapping::Unmapped),
            other => Err(Error::Config(format!("unknown energy mapping `{other}` (expected mapped or unmapped)"))),
        }
    }
}

trait ConfigValue: Sized {
    fn parse_value(key: &str, s: &str) -> Result<Self>;
    fn render(&self) -> String;
}

fn bad_value(key: &str, s: &str, expected: &str) -> Error {
    Error::Config(format!("invalid value `{s}` for `{key}`: expected {expected}"))
}

impl ConfigValue for f64 {
    fn parse_value(key: &str, s: &str) -> Result<Self> {
        s.parse().map_err(|_| bad_value(key, s, "a real number"))
    }
    fn render(&self) -> String {
        format_real(*self)
    }
}

impl ConfigValue for usize {
    fn parse_value(key: &str, s: &str) -> Result<Self> {
        s.parse().map_err(|_| bad_value(key, s, "a nonnegative integer"))
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for u64 {
    fn parse_value(key: &str, s: &str) -> Result<Self> {
        s.parse().map_err(|_| bad_value(key, s, "a nonnegative integer"))
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for bool {
    fn parse_value(key: &str, s: &str) -> Result<Self> {
        s.parse().map_err(|_| bad_value(key, s, "true or false"))
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for String {
    fn parse_value(_: &str, s: &str) -> Result<Self> {
        Ok(s.to_string())
    }
    fn render(&self) -> String {
        self.clone()
    }
}

macro_rules! enum_value {
    ($($ty:ty),*) => {$(
        impl ConfigValue for $ty {
            fn parse_value(_: &str, s: &str) -> Result<Self> {
                s.parse()
            }
            fn render(&self) -> String {
                self.as_str().to_string()
            }
        }
    )*};
}

enum_value!(LaplacianMode, SolverChoice, Head, Precision, DiffuseMode, EnergyMapping);

macro_rules! run_config {
    ($($field:ident: $ty:ty = $default:expr, $help:literal;)*) => {
        /// Every setting of every subcommand.
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $(pub $field: $ty,)*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self { $($field: $default,)* }
            }
        }

        /// Config keys in echo order, with their help text.
        pub const KEYS: &[(&str, &str)] = &[$((stringify!($field), $help),)*];

        impl RunConfig {
            /// Sets one key from its textual value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $(stringify!($field) => self.$field = <$ty as ConfigValue>::parse_value(key, value.trim())?,)*
                    other => return Err(Error::Config(format!("unknown config key `{other}`"))),
                }
                Ok(())
            }

            /// Textual value of one key.
            pub fn get(&self, key: &str) -> Option<String> {
                match key {
                    $(stringify!($field) => Some(self.$field.render()),)*
                    _ => None,
                }
            }
        }
    };
}

run_config! {
    dataset: String = String::new(), "dataset directory (edges.csv, features.csv, labels.csv)";
    output_dir: String = "out".into(), "directory receiving every output file";
    checkpoint: String = String::new(), "checkpoint file read by eval";
    alpha: f64 = 0.1, "weight of the ego source term";
    beta: f64 = 0.05, "weight of the LoG source term";
    gamma: f64 = 0.05, "weight of the Laplacian source term";
    delta: f64 = 0.8, "propagation weight; alpha + beta + gamma + delta = 1";
    k: usize = 2, "active diffusion steps for the local embeddings";
    tau: f64 = 0.5, "passive diffusion step size";
    neumann_terms: usize = 32, "Neumann truncation point T";
    laplacian: LaplacianMode = LaplacianMode::PaperDegree, "paper-degree or identity-degree";
    solver: SolverChoice = SolverChoice::Auto, "auto, dense or neumann";
    dense_threshold: usize = crate::graph_core::DEFAULT_DENSE_THRESHOLD, "largest N factorized densely";
    hidden_dim: usize = 64, "ego embedding width d'";
    learning_rate: f64 = 0.01, "optimizer step size";
    weight_decay: f64 = 5e-4, "decoupled weight decay";
    max_epochs: usize = 500, "epoch limit";
    patience: usize = 100, "epochs without validation improvement before stopping";
    dropout: f64 = 0.5, "dropout on the ego embeddings during training";
    head: Head = Head::Hadamard, "hadamard or mlp";
    seed: u64 = 0, "first initialization seed (and generator seed for gen-synth)";
    precision: Precision = Precision::F64, "f32 or f64";
    seeds: usize = 5, "number of training runs, seeds seed..seed+seeds";
    resample_splits: bool = false, "draw a fresh split for every run";
    train_frac: f64 = 0.48, "training fraction per class";
    valid_frac: f64 = 0.32, "validation fraction per class";
    test_frac: f64 = 0.20, "test fraction per class";
    per_class: bool = true, "stratify the split by class";
    split_seed: u64 = 0, "split seed when the dataset has no splits.json";
    mode: DiffuseMode = DiffuseMode::GlobalDense, "diffuse output: source, local, global-dense or global-neumann";
    energy_mapping: EnergyMapping = EnergyMapping::Mapped, "energy-check weights: mapped or unmapped";
    k_max: usize = 200, "oversmooth-bench step count";
    n_nodes: usize = 500, "gen-synth node count";
    n_classes: usize = 5, "gen-synth class count";
    homophily: f64 = 0.8, "gen-synth edge homophily target";
    feature_dim: usize = 32, "gen-synth feature width";
    feature_signal: f64 = 1.0, "gen-synth class-mean scale";
    mean_degree: f64 = crate::data::DEFAULT_MEAN_DEGREE, "gen-synth expected mean degree";
}

impl RunConfig {
    /// Applies `key = value` lines from `text`; `origin` names the source in errors.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected `key = value`, found `{line}`", origin.display(), i + 1))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Config(format!("{}:{}: {}", origin.display(), i + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, path)
    }

    /// Every key with its resolved value, in a form [`RunConfig::apply_text`] reads back.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, _) in KEYS {
            out.push_str(&format!("{key} = {}\n", self.get(key).expect("schema key")));
        }
        out
    }

    pub fn diffusion(&self) -> Result<DiffusionParams> {
        let p = DiffusionParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            delta: self.delta,
            k: self.k,
            tau: self.tau,
            neumann_terms: self.neumann_terms,
        };
        p.validate().map_err(to_config)?;
        Ok(p)
    }

    pub fn bundle_options(&self) -> BundleOptions {
        BundleOptions {
            laplacian: self.laplacian,
            dense_threshold: self.dense_threshold,
            solver: self.solver,
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let c = TrainConfig {
            hidden_dim: self.hidden_dim,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            max_epochs: self.max_epochs,
            patience: self.patience,
            dropout: self.dropout,
            head: self.head,
            seed: self.seed,
            precision: self.precision,
        };
        c.validate().map_err(to_config)?;
        Ok(c)
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        let s = SplitSpec {
            train_frac: self.train_frac,
            valid_frac: self.valid_frac,
            test_frac: self.test_frac,
            per_class: self.per_class,
            seed: self.split_seed,
        };
        s.validate().map_err(to_config)?;
        Ok(s)
    }

    pub fn synth_spec(&self) -> Result<SynthSpec> {
        let s = SynthSpec {
            n_nodes: self.n_nodes,
            n_classes: self.n_classes,
            homophily: self.homophily,
            feature_dim: self.feature_dim,
            feature_signal: self.feature_signal,
            mean_degree: self.mean_degree,
            seed: self.seed,
        };
        s.validate().map_err(to_config)?;
        Ok(s)
    }

    fn required_path(&self, key: &str, value: &str) -> Result<PathBuf> {
        if value.is_empty() {
            Err(Error::Config(format!("missing required key `{key}`")))
        } else {
            Ok(PathBuf::from(value))
        }
    }

    pub fn dataset_path(&self) -> Result<PathBuf> {
        self.required_path("dataset", &self.dataset)
    }

    pub fn checkpoint_path(&self) -> Result<PathBuf> {
        self.required_path("checkpoint", &self.checkpoint)
    }

    pub fn output_path(&self) -> PathBuf {
        PathBuf::from(&self.output_dir)
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(msg) => msg.clone(),
        other => other.to_string(),
    }
}

fn to_config(e: Error) -> Error {
    Error::Config(strip_prefix(&e))
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
