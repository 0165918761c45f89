use ndarray::{s, Array2, ArrayView2, NdFloat, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::diffusion::{local_from_source, source_term, DiffusionParams};
use crate::error::{Error, Result};
use crate::graph_core::OperatorBundle;

use super::layers::{
    ce_loss_from_logits, check_labels, column_sums, concat_embeddings, head_forward, relu, relu_backward,
    softmax_rows,
};
use super::params::{Head, ModelParams};

/// Dropout on the ego embeddings during training.
pub struct Dropout<'r> {
    pub rate: f64,
    pub rng: &'r mut ChaCha8Rng,
}

/// Intermediates of one forward pass, tagged with the parameter version.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    version: u64,
    x: Array2<T>,
    ego_pre: Array2<T>,
    dropout_mask: Option<Array2<T>>,
    x_star: Array2<T>,
    local: Array2<T>,
    global: Array2<T>,
    hcat: Array2<T>,
    head_pre: Array2<T>,
    head_hidden: Array2<T>,
    logits: Array2<T>,
    probs: Array2<T>,
}

impl<T: NdFloat> ForwardCache<T> {
    pub fn version(&self) -> u64 {
        self.version
    }

    /// `X*` (after dropout when training).
    pub fn ego(&self) -> &Array2<T> {
        &self.x_star
    }

    /// `H⁽ᴷ⁾`.
    pub fn local(&self) -> &Array2<T> {
        &self.local
    }

    /// `H*`.
    pub fn global(&self) -> &Array2<T> {
        &self.global
    }

    pub fn concatenated(&self) -> &Array2<T> {
        &self.hcat
    }

    pub fn logits(&self) -> &Array2<T> {
        &self.logits
    }

    pub fn probabilities(&self) -> &Array2<T> {
        &self.probs
    }
}

/// The fixed (non-learnable) part of the model: operators, diffusion
/// weights and head choice.
#[derive(Debug, Clone, Copy)]
pub struct Pipeline<'a> {
    bundle: &'a OperatorBundle,
    params: DiffusionParams,
    head: Head,
}

fn scalar<T: NdFloat>(v: f64) -> T {
    T::from(v).expect("representable scalar")
}

impl<'a> Pipeline<'a> {
    pub fn new(bundle: &'a OperatorBundle, params: DiffusionParams, head: Head) -> Result<Self> {
        params.validate()?;
        if bundle.delta() != params.delta {
            return Err(Error::InvalidParameter(format!(
                "bundle was precomputed for delta = {}, params have delta = {}",
                bundle.delta(),
                params.delta
            )));
        }
        Ok(Self { bundle, params, head })
    }

    pub fn bundle(&self) -> &'a OperatorBundle {
        self.bundle
    }

    pub fn diffusion(&self) -> &DiffusionParams {
        &self.params
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn forward<T: NdFloat>(
        &self,
        x: ArrayView2<'_, T>,
        params: &ModelParams<T>,
        dropout: Option<Dropout<'_>>,
    ) -> Result<ForwardCache<T>> {
        if params.head() != self.head {
            return Err(Error::InvalidParameter(format!(
                "parameters were built for the {} head, pipeline uses {}",
                params.head(),
                self.head
            )));
        }
        if x.nrows() != self.bundle.num_nodes() {
            return Err(Error::dims("forward", format!("{} rows", self.bundle.num_nodes()), format!("{} rows", x.nrows())));
        }
        if x.ncols() != params.input_dim() {
            return Err(Error::dims("forward", format!("{} feature columns", params.input_dim()), x.ncols()));
        }
        let mut ego_pre = x.dot(&params.ego_weight().value);
        ego_pre += &params.ego_bias().value;
        let mut x_star = ego_pre.mapv(relu);
        let dropout_mask = match dropout {
            Some(Dropout { rate, rng }) if rate > 0.0 => {
                let keep = scalar::<T>(1.0 / (1.0 - rate));
                let mask = Array2::from_shape_simple_fn(x_star.raw_dim(), || {
                    if rng.random::<f64>() < rate {
                        T::zero()
                    } else {
                        keep
                    }
                });
                x_star *= &mask;
                Some(mask)
            }
            _ => None,
        };
        let source = source_term(x_star.view(), self.bundle, &self.params)?;
        let local = local_from_source(x_star.view(), source.view(), self.bundle, &self.params)?;
        let global = self.bundle.apply_global(source.view())?;
        let hcat = concat_embeddings(x_star.view(), local.view(), global.view())?;
        let head = head_forward(hcat.view(), params)?;
        let probs = softmax_rows(head.logits.view());
        Ok(ForwardCache {
            version: params.version(),
            x: x.to_owned(),
            ego_pre,
            dropout_mask,
            x_star,
            local,
            global,
            hcat,
            head_pre: head.pre,
            head_hidden: head.hidden,
            logits: head.logits,
            probs,
        })
    }

    /// Class probabilities in evaluation mode.
    pub fn predict<T: NdFloat>(&self, x: ArrayView2<'_, T>, params: &ModelParams<T>) -> Result<Array2<T>> {
        Ok(self.forward(x, params, None)?.probs)
    }

    /// Fills every gradient buffer with `∂L/∂θ` for the loss summed over
    /// `mask`; returns the loss.
    pub fn backward<T: NdFloat>(
        &self,
        cache: &ForwardCache<T>,
        labels: &[usize],
        mask: &[bool],
        params: &mut ModelParams<T>,
    ) -> Result<f64> {
        let weights: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        self.backward_weighted(cache, labels, &weights, params)
    }

    /// As [`Pipeline::backward`] with a per-node weight on each loss term.
    pub fn backward_weighted<T: NdFloat>(
        &self,
        cache: &ForwardCache<T>,
        labels: &[usize],
        weights: &[f64],
        params: &mut ModelParams<T>,
    ) -> Result<f64> {
        if cache.version != params.version() {
            return Err(Error::StaleCache {
                cached: cache.version,
                current: params.version(),
            });
        }
        let n = cache.probs.nrows();
        check_labels("backward", n, cache.probs.ncols(), labels, weights.len())?;
        let loss = ce_loss_from_logits(cache.logits.view(), labels, weights)?;
        params.zero_grad();

        // Softmax + cross-entropy: dZ = w_u (Y − onehot).
        let mut d_logits = cache.probs.clone();
        for (u, mut row) in d_logits.rows_mut().into_iter().enumerate() {
            let w = scalar::<T>(weights[u]);
            row[labels[u]] -= T::one();
            row.mapv_inplace(|v| v * w);
        }

        let d = params.hidden_dim();
        let d_hidden = d_logits.dot(&params.out_weight().value.t());
        let d_pre = relu_backward(&d_hidden, &cache.head_pre);
        let d_hcat = match self.head {
            Head::Hadamard => &d_pre * &params.scale().value,
            Head::Mlp => d_pre.dot(&params.mix().expect("mlp parameters").0.value.t()),
        };

        // Global branch: H* = G S with G symmetric.
        let d_global = d_hcat.slice(s![.., 2 * d..3 * d]);
        let mut d_source = self.bundle.apply_global(d_global)?;
        // Local branch: reverse the K steps H ← S + δÂH.
        let delta = scalar::<T>(self.params.delta);
        let mut g = d_hcat.slice(s![.., d..2 * d]).to_owned();
        for _ in 0..self.params.k {
            d_source += &g;
            g = self.bundle.adjacency().spmm(g.view())?;
            g.mapv_inplace(|v| v * delta);
        }
        // Ego branch plus H⁽⁰⁾ = X*.
        let mut d_x_star = g;
        d_x_star += &d_hcat.slice(s![.., 0..d]);
        // Source transpose: αI + β(L̂Â)ᵀ + γL̂ᵀ = αI + βÂL̂ + γL̂.
        d_x_star.scaled_add(scalar(self.params.alpha), &d_source);
        if self.params.beta != 0.0 || self.params.gamma != 0.0 {
            let lap_d = self.bundle.laplacian().spmm(d_source.view())?;
            if self.params.beta != 0.0 {
                d_x_star.scaled_add(scalar(self.params.beta), &self.bundle.adjacency().spmm(lap_d.view())?);
            }
            if self.params.gamma != 0.0 {
                d_x_star.scaled_add(scalar(self.params.gamma), &lap_d);
            }
        }
        if let Some(mask) = &cache.dropout_mask {
            d_x_star *= mask;
        }
        let d_ego_pre = relu_backward(&d_x_star, &cache.ego_pre);

        let grads = {
            let mut g = vec![
                cache.x.t().dot(&d_ego_pre),
                column_sums(&d_ego_pre),
                Array2::zeros((1, 3 * d)),
                cache.head_hidden.t().dot(&d_logits),
                column_sums(&d_logits),
            ];
            match self.head {
                Head::Hadamard => {
                    g[2] = column_sums(&Zip::from(&d_pre).and(&cache.hcat).map_collect(|&a, &b| a * b));
                }
                Head::Mlp => {
                    g.push(cache.hcat.t().dot(&d_pre));
                    g.push(column_sums(&d_pre));
                }
            }
            g
        };
        for ((_, p), g) in params.tensors_mut().into_iter().zip(grads) {
            p.grad = g;
        }
        Ok(loss)
    }
}
