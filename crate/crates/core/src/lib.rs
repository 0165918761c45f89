//! Active diffusion graph neural networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph_core`]: graphs, canonical CSR operators (`Â`, `L̂`, `L̂Â`), sparse
//!   products and the precomputed [`graph_core::OperatorBundle`].
//! - [`diffusion`]: the passive baseline, the active diffusion recursion, and
//!   its infinite-diffusion limit by dense solve or truncated Neumann series.
//! - [`energy`]: the quadratic energy whose minimizer coincides with the
//!   infinite-diffusion embeddings.
//! - [`model`]: the trainable network (ego layer, three-scale concatenation,
//!   prediction heads), manual backpropagation and the training loop.
//! - [`data`]: dataset files, splits, synthetic block-model graphs and
//!   graph metrics.
//! - [`cli`]: the `adgnn` command-line front end.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod cli;
pub mod data;
pub mod diffusion;
pub mod energy;
pub mod error;
pub mod graph_core;
pub mod model;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
