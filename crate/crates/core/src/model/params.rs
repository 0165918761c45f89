use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, NdFloat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EGO_WEIGHT: &str = "W'";
pub const EGO_BIAS: &str = "b'";
pub const SCALE: &str = "w";
pub const OUT_WEIGHT: &str = "W''";
pub const OUT_BIAS: &str = "b''";
pub const MIX_WEIGHT: &str = "W'''";
pub const MIX_BIAS: &str = "b'''";

/// Prediction head applied to the concatenated embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// `Softmax(ReLU(H ⊙ w)W'' + b'')`.
    #[default]
    Hadamard,
    /// `Softmax(ReLU(HW''' + b''')W'' + b'')`.
    Mlp,
}

impl Head {
    pub fn as_str(self) -> &'static str {
        match self {
            Head::Hadamard => "hadamard",
            Head::Mlp => "mlp",
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hadamard" => Ok(Head::Hadamard),
            "mlp" => Ok(Head::Mlp),
            other => Err(Error::Config(format!("unknown head `{other}` (expected hadamard or mlp)"))),
        }
    }
}

/// A learnable tensor and its gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Array2<T>,
    pub grad: Array2<T>,
}

impl<T: NdFloat> Param<T> {
    fn new(value: Array2<T>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Self { value, grad }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.dim()
    }

    /// Whether weight decay applies (weights yes, biases no).
    pub fn decays(name: &str) -> bool {
        !name.starts_with('b')
    }
}

/// Every learnable tensor of the model.
///
/// Values change only through [`ModelParams::set`] or the optimizer; each
/// change bumps [`ModelParams::version`], which forward caches record.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    ego_weight: Param<T>,
    ego_bias: Param<T>,
    scale: Param<T>,
    out_weight: Param<T>,
    out_bias: Param<T>,
    mix: Option<(Param<T>, Param<T>)>,
    version: u64,
}

fn glorot<T: NdFloat>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<T> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || {
        T::from(rng.random_range(-bound..bound)).expect("representable weight")
    })
}

impl<T: NdFloat> ModelParams<T> {
    /// Seeded initialization: weights uniform in `±sqrt(6/(fan_in + fan_out))`,
    /// biases zero, the Hadamard scale `w` all ones.
    pub fn init(input_dim: usize, hidden_dim: usize, num_classes: usize, head: Head, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h3 = 3 * hidden_dim;
        let ego_weight = glorot(input_dim, hidden_dim, &mut rng);
        let out_weight = glorot(h3, num_classes, &mut rng);
        let mix = match head {
            Head::Hadamard => None,
            Head::Mlp => Some((Param::new(glorot(h3, h3, &mut rng)), Param::new(Array2::zeros((1, h3))))),
        };
        Self {
            ego_weight: Param::new(ego_weight),
            ego_bias: Param::new(Array2::zeros((1, hidden_dim))),
            scale: Param::new(Array2::ones((1, h3))),
            out_weight: Param::new(out_weight),
            out_bias: Param::new(Array2::zeros((1, num_classes))),
            mix,
            version: 0,
        }
    }

    /// All tensors zero, `w` included.
    pub fn zeros(input_dim: usize, hidden_dim: usize, num_classes: usize, head: Head) -> Self {
        let h3 = 3 * hidden_dim;
        let z = |r, c| Param::new(Array2::zeros((r, c)));
        Self {
            ego_weight: z(input_dim, hidden_dim),
            ego_bias: z(1, hidden_dim),
            scale: z(1, h3),
            out_weight: z(h3, num_classes),
            out_bias: z(1, num_classes),
            mix: (head == Head::Mlp).then(|| (z(h3, h3), z(1, h3))),
            version: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.ego_weight.value.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.ego_weight.value.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.out_weight.value.ncols()
    }

    pub fn head(&self) -> Head {
        if self.mix.is_some() {
            Head::Mlp
        } else {
            Head::Hadamard
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn ego_weight(&self) -> &Param<T> {
        &self.ego_weight
    }

    pub fn ego_bias(&self) -> &Param<T> {
        &self.ego_bias
    }

    pub fn scale(&self) -> &Param<T> {
        &self.scale
    }

    pub fn out_weight(&self) -> &Param<T> {
        &self.out_weight
    }

    pub fn out_bias(&self) -> &Param<T> {
        &self.out_bias
    }

    /// `(W''', b''')` for the mlp head.
    pub fn mix(&self) -> Option<(&Param<T>, &Param<T>)> {
        self.mix.as_ref().map(|(w, b)| (w, b))
    }

    /// Tensors in canonical order, paired with their names.
    pub fn tensors(&self) -> Vec<(&'static str, &Param<T>)> {
        let mut out = vec![
            (EGO_WEIGHT, &self.ego_weight),
            (EGO_BIAS, &self.ego_bias),
            (SCALE, &self.scale),
            (OUT_WEIGHT, &self.out_weight),
            (OUT_BIAS, &self.out_bias),
        ];
        if let Some((w, b)) = &self.mix {
            out.push((MIX_WEIGHT, w));
            out.push((MIX_BIAS, b));
        }
        out
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Param<T>)> {
        let mut out = vec![
            (EGO_WEIGHT, &mut self.ego_weight),
            (EGO_BIAS, &mut self.ego_bias),
            (SCALE, &mut self.scale),
            (OUT_WEIGHT, &mut self.out_weight),
            (OUT_BIAS, &mut self.out_bias),
        ];
        if let Some((w, b)) = &mut self.mix {
            out.push((MIX_WEIGHT, w));
            out.push((MIX_BIAS, b));
        }
        out
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.tensors().into_iter().find(|(n, _)| *n == name).map(|(_, p)| p)
    }

    /// Replaces one tensor's value; the shape must match.
    pub fn set(&mut self, name: &str, value: Array2<T>) -> Result<()> {
        let param = self
            .tensors_mut()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::Checkpoint {
                name: name.to_string(),
                msg: "no such tensor for this head".into(),
            })?;
        if param.value.dim() != value.dim() {
            return Err(Error::Checkpoint {
                name: name.to_string(),
                msg: format!("shape {:?} does not match expected {:?}", value.dim(), param.value.dim()),
            });
        }
        param.value = value;
        self.bump();
        Ok(())
    }

    pub(crate) fn bump(&mut self) {
        self.version += 1;
    }

    pub fn zero_grad(&mut self) {
        for (_, p) in self.tensors_mut() {
            p.grad.fill(T::zero());
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, p)| p.value.iter().all(|v| v.is_finite()))
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, p)| p.value.len()).sum()
    }

    /// Same parameters in another float type; gradients are reset.
    pub fn cast<U: NdFloat>(&self) -> ModelParams<U> {
        let conv = |p: &Param<T>| Param::new(p.value.mapv(|v| U::from(v).expect("representable value")));
        ModelParams {
            ego_weight: conv(&self.ego_weight),
            ego_bias: conv(&self.ego_bias),
            scale: conv(&self.scale),
            out_weight: conv(&self.out_weight),
            out_bias: conv(&self.out_bias),
            mix: self.mix.as_ref().map(|(w, b)| (conv(w), conv(b))),
            version: 0,
        }
    }
}
